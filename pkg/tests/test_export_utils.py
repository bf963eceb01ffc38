import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from dataset import StateGenerator, bell_state
from export_utils import (
    ExportManager, rows_to_frame, frame_to_rows, load_rows, read_table, write_table,
    summarize_rows, write_density_matrices, read_density_matrices,
)
from sweep_engine import SweepConfig, SweepEngine

SWEEP_TEXT = """
preset = ising
sites = 4
hgrid = 0.5,1.0
distances = 1,3,4
"""


@pytest.fixture(scope="module")
def sweep():
    config = SweepConfig.from_text(SWEEP_TEXT)
    return config, SweepEngine(config).run_sweep()


class TestRowFiles:
    def test_csv_is_byte_deterministic(self, sweep, tmp_path):
        config, rows = sweep
        first = ExportManager(config).export_rows_csv(rows, str(tmp_path / "a.csv"))
        second = ExportManager(config).export_rows_csv(list(reversed(rows)), str(tmp_path / "b.csv"))
        with open(first, "rb") as a, open(second, "rb") as b:
            assert a.read() == b.read()

    def test_csv_round_trip(self, sweep, tmp_path):
        config, rows = sweep
        filename = ExportManager(config).export_rows(rows, str(tmp_path / "rows.csv"))
        frame, provenance = load_rows(filename)
        assert provenance["config_hash"] == config.config_hash
        assert SweepConfig.from_text(provenance["config"]).config_hash == config.config_hash
        assert [row.to_dict() for row in frame_to_rows(frame)] == [row.to_dict() for row in rows]

    def test_missing_values_are_written_as_null(self, sweep, tmp_path):
        config, rows = sweep
        filename = ExportManager(config).export_rows_csv(rows, str(tmp_path / "rows.csv"))
        with open(filename, encoding="utf-8") as f:
            text = f.read()
        assert "null" in text
        assert ",nan" not in text.lower()

    def test_json_round_trip(self, sweep, tmp_path):
        config, rows = sweep
        filename = ExportManager(config).export_rows(rows, str(tmp_path / "rows.json"), fmt="json")
        with open(filename, encoding="utf-8") as f:
            data = json.load(f)
        assert data["export_info"]["total_rows"] == len(rows)

        frame, provenance = load_rows(filename)
        assert provenance["config_hash"] == config.config_hash
        assert [row.to_dict() for row in frame_to_rows(frame)] == [row.to_dict() for row in rows]

    def test_unknown_format(self, sweep, tmp_path):
        config, rows = sweep
        with pytest.raises(ValueError):
            ExportManager(config).export_rows(rows, str(tmp_path / "rows.xml"), fmt="xml")

    def test_frame_needs_every_column(self):
        with pytest.raises(ValueError, match="lacks columns"):
            frame_to_rows(pd.DataFrame({"preset": ["ising"]}))


class TestTables:
    def test_write_and_read(self, tmp_path):
        frame = pd.DataFrame({"h": [0.1, 0.2], "dQ_dh": [1.0 / 3.0, np.nan]})
        filename = str(tmp_path / "table.csv")
        text = write_table(frame, filename)
        assert text.splitlines()[0] == "h,dQ_dh"
        assert text.splitlines()[2].endswith("null")

        loaded, provenance = read_table(filename)
        assert provenance["config_hash"] is None
        assert loaded["dQ_dh"][0] == 1.0 / 3.0
        assert np.isnan(loaded["dQ_dh"][1])

    def test_floats_are_read_back_bit_exactly(self, rng, tmp_path):
        values = np.concatenate([[0.8935481721781016, 0.9224467095983794, -0.9999999999999999], rng.random(200)])
        filename = str(tmp_path / "exact.csv")
        write_table(pd.DataFrame({"value": values}), filename)
        loaded, _ = read_table(filename)
        assert loaded["value"].tolist() == values.tolist()

    def test_summary(self, sweep):
        _, rows = sweep
        summary = summarize_rows(rows_to_frame(rows))
        assert summary["total_rows"] == 6
        assert summary["error_rows"] == 2
        assert summary["sizes"] == [4]
        assert summary["distances"] == [1, 3, 4]
        assert summary["field_range"] == [0.5, 1.0]
        assert summary["rows_per_family"] == {"thermal": 6}
        assert summary["Q_max"] > 0

    def test_summary_report(self, sweep, tmp_path):
        _, rows = sweep
        filename = ExportManager().export_summary_report(
            summarize_rows(rows_to_frame(rows)), {"critical": {"locations": [0.9]}}, filename=str(tmp_path / "r.json"))
        with open(filename, encoding="utf-8") as f:
            report = json.load(f)
        assert report["summary"]["total_rows"] == 6
        assert report["detections"]["critical"]["locations"] == [0.9]

    def test_excel_workbook(self, sweep, tmp_path):
        _, rows = sweep
        frame = rows_to_frame(rows)
        filename = ExportManager().export_excel_workbook(
            frame, summarize_rows(frame), {"witness": {"zeros": []}}, filename=str(tmp_path / "r.xlsx"))
        sheets = pd.read_excel(filename, sheet_name=None, engine="openpyxl")
        assert list(sheets) == ["Rows", "Summary", "Errors", "Detections"]
        assert len(sheets["Rows"]) == 6
        assert len(sheets["Errors"]) == 2


class TestDensityMatrixFiles:
    def test_round_trip(self, tmp_path):
        states = {"bell": bell_state(), "random r=2": StateGenerator(seed=1).random_state()}
        states["random r=2"].r = 2
        filename = write_density_matrices(states, str(tmp_path / "states.txt"))

        loaded = read_density_matrices(filename)
        assert list(loaded) == ["bell", "random r=2"]
        assert loaded["random r=2"].r == 2
        assert loaded["bell"].r is None
        for label, state in states.items():
            assert_allclose(loaded[label].matrix, state.matrix, atol=1e-15)

    def test_malformed_block(self, tmp_path):
        filename = tmp_path / "bad.txt"
        filename.write_text("# label = broken\n1 0 0 0\n")
        with pytest.raises(ValueError, match="shape"):
            read_density_matrices(str(filename))
