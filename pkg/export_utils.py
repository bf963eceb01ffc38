"""
Export utilities for sweep rows and reduced density matrices
"""
import json
import math
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import SWEEP_CONFIG
from correlations import TwoSiteState
from sweep_engine import ROW_COLUMNS, SweepConfig, SweepRow

FORMAT_VERSION = "1.0"
NULL = "null"

_INT_COLUMNS = ("L", "r")


def float_format() -> str:
    return f"%.{SWEEP_CONFIG['float_digits']}g"


def _format_float(value: float) -> str:
    return float_format() % value


def rows_to_frame(rows: List[SweepRow]) -> pd.DataFrame:
    """Rows as a DataFrame with the canonical column order"""
    return pd.DataFrame([row.to_dict() for row in rows], columns=ROW_COLUMNS)


def _clean(value: Any) -> Any:
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


def _parse_bool(value: Any) -> Optional[bool]:
    if value is None:
        return None
    if isinstance(value, str):
        if value not in ("True", "False"):
            raise ValueError(f"expected True or False, got {value!r}")
        return value == "True"
    return bool(value)


def frame_to_rows(frame: pd.DataFrame) -> List[SweepRow]:
    """Inverse of rows_to_frame; NaN cells become None"""
    missing = [column for column in ROW_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"sweep table lacks columns: {', '.join(missing)}")

    rows = []
    for record in frame[ROW_COLUMNS].to_dict(orient="records"):
        values = {key: _clean(value) for key, value in record.items()}
        for key in _INT_COLUMNS:
            if values[key] is not None:
                values[key] = int(values[key])
        for key in ("preset", "family", "error"):
            if values[key] is not None:
                values[key] = str(values[key])
        values["upper_bound"] = _parse_bool(values["upper_bound"])
        rows.append(SweepRow(**values))
    return rows


class ExportManager:
    """Writes and reads sweep results"""

    def __init__(self, config: Optional[SweepConfig] = None):
        self.config = config
        self.timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")

    def _provenance_lines(self) -> List[str]:
        if self.config is None:
            return []
        lines = [f"# config_hash = {self.config.config_hash}"]
        lines += [f"# {line}" for line in self.config.to_text().splitlines()]
        return lines

    def export_rows_csv(self, rows: List[SweepRow], filename: Optional[str] = None) -> str:
        """Export rows to CSV; identical rows and config give identical bytes"""

        if filename is None:
            filename = f"sweep_results_{self.timestamp}.csv"

        ordered = sorted(rows, key=lambda row: row.sort_key)
        body = rows_to_frame(ordered).to_csv(
            index=False,
            float_format=float_format(),
            na_rep=NULL,
            lineterminator="\n",
        )

        with open(filename, "w", encoding="utf-8", newline="") as f:
            for line in self._provenance_lines():
                f.write(line + "\n")
            f.write(body)

        return filename

    def export_rows_json(self, rows: List[SweepRow], filename: Optional[str] = None) -> str:
        """Export rows to JSON; floats are written as their shortest exact repr"""

        if filename is None:
            filename = f"sweep_results_{self.timestamp}.json"

        data = {
            "export_info": {
                "format_version": FORMAT_VERSION,
                "total_rows": len(rows),
                "config_hash": self.config.config_hash if self.config else None,
                "config": self.config.to_text() if self.config else None,
            },
            "rows": [row.to_dict() for row in sorted(rows, key=lambda row: row.sort_key)],
        }

        with open(filename, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)

        return filename

    def export_rows(self, rows: List[SweepRow], filename: Optional[str] = None, fmt: str = "csv") -> str:
        if fmt == "csv":
            return self.export_rows_csv(rows, filename)
        if fmt == "json":
            return self.export_rows_json(rows, filename)
        raise ValueError(f"unknown export format {fmt!r}")

    def export_summary_report(
        self,
        summary: Dict[str, Any],
        detections: Optional[Dict[str, Any]] = None,
        filename: Optional[str] = None,
    ) -> str:
        """Export a sweep summary (and any detections) as a JSON report"""

        if filename is None:
            filename = f"sweep_report_{self.timestamp}.json"

        report = {
            "report_info": {
                "generated_at": datetime.now().isoformat(),
                "format_version": FORMAT_VERSION,
            },
            "summary": summary,
            "detections": detections or {},
        }

        with open(filename, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, ensure_ascii=False, default=str)

        return filename

    def export_excel_workbook(
        self,
        frame: pd.DataFrame,
        summary: Dict[str, Any],
        detections: Optional[Dict[str, Any]] = None,
        filename: Optional[str] = None,
    ) -> str:
        """Export rows, summary, failed points and detections to an Excel workbook"""

        if filename is None:
            filename = f"sweep_report_{self.timestamp}.xlsx"

        with pd.ExcelWriter(filename, engine="openpyxl") as writer:
            frame.to_excel(writer, sheet_name="Rows", index=False)

            summary_df = pd.DataFrame(
                [{"metric": key, "value": json.dumps(value, default=str)} for key, value in summary.items()]
            )
            summary_df.to_excel(writer, sheet_name="Summary", index=False)

            errors = frame[frame["error"].notna()] if "error" in frame.columns else frame.iloc[0:0]
            errors.to_excel(writer, sheet_name="Errors", index=False)

            if detections:
                detection_df = pd.DataFrame(
                    [{"detection": key, "result": json.dumps(value, default=str)} for key, value in detections.items()]
                )
                detection_df.to_excel(writer, sheet_name="Detections", index=False)

        return filename


def _split_provenance(filename: str) -> Tuple[int, Dict[str, Any]]:
    skip = 0
    config_lines = []
    config_hash = None

    with open(filename, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            skip += 1
            content = line[1:].strip()
            if content.startswith("config_hash ="):
                config_hash = content.split("=", 1)[1].strip()
            else:
                config_lines.append(content)

    return skip, {"config_hash": config_hash, "config": "\n".join(config_lines) + "\n" if config_lines else None}


def read_table(filename: str, **kwargs) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Any CSV written by this package: '#' provenance lines, then a header row"""
    skip, provenance = _split_provenance(filename)
    kwargs.setdefault("float_precision", "round_trip")
    frame = pd.read_csv(filename, skiprows=skip, na_values=[NULL], keep_default_na=False, **kwargs)
    return frame, provenance


def write_table(frame: pd.DataFrame, filename: Optional[str] = None) -> str:
    """CSV text of a derived table in the sweep float format; written when a filename is given"""
    text = frame.to_csv(index=False, float_format=float_format(), na_rep=NULL, lineterminator="\n")
    if filename:
        with open(filename, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text


def load_rows_csv(filename: str) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Read a sweep CSV back into a DataFrame plus its provenance header"""
    return read_table(filename, dtype={"preset": str, "family": str, "error": str})


def load_rows_json(filename: str) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    with open(filename, "r", encoding="utf-8") as f:
        data = json.load(f)

    info = data.get("export_info", {})
    frame = pd.DataFrame(data["rows"], columns=ROW_COLUMNS)
    return frame, {"config_hash": info.get("config_hash"), "config": info.get("config")}


def load_rows(filename: str) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Dispatch on the file extension"""
    if filename.endswith(".json"):
        return load_rows_json(filename)
    return load_rows_csv(filename)


def summarize_rows(frame: pd.DataFrame) -> Dict[str, Any]:
    """Counts per family and size, failed points and parameter ranges"""
    ok = frame[frame["error"].isna()]
    summary = {
        "total_rows": int(len(frame)),
        "error_rows": int(frame["error"].notna().sum()),
        "presets": sorted(str(p) for p in frame["preset"].dropna().unique()),
        "rows_per_family": {str(k): int(v) for k, v in frame.groupby("family").size().items()},
        "sizes": sorted(int(size) for size in frame["L"].dropna().unique()),
        "distances": sorted(int(r) for r in frame["r"].dropna().unique()),
        "field_range": [float(frame["h"].min()), float(frame["h"].max())] if len(frame) else None,
    }

    if "delta" in frame.columns and frame["delta"].notna().any():
        summary["delta_range"] = [float(frame["delta"].min()), float(frame["delta"].max())]

    for observable in ("Q", "C", "concurrence", "witness_norm"):
        values = ok[observable].dropna()
        if len(values):
            summary[f"{observable}_max"] = float(values.max())

    return summary


def write_density_matrices(states: Dict[str, TwoSiteState], filename: str) -> str:
    """
    One block per matrix: a '# label = ...' header, then four rows of
    interleaved real and imaginary parts; blocks are separated by a blank line.
    """
    blocks = []
    for label, state in states.items():
        lines = [f"# label = {label}", f"# r = {state.r}", f"# source = {state.source}"]
        for row in np.asarray(state.matrix):
            lines.append(" ".join(f"{_format_float(z.real)} {_format_float(z.imag)}" for z in row))
        blocks.append("\n".join(lines))

    with open(filename, "w", encoding="utf-8") as f:
        f.write("\n\n".join(blocks) + "\n")

    return filename


def read_density_matrices(filename: str) -> Dict[str, TwoSiteState]:
    with open(filename, "r", encoding="utf-8") as f:
        blocks = [block for block in f.read().split("\n\n") if block.strip()]

    states = {}
    for block in blocks:
        header = {}
        values = []
        for line in block.strip().splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
            else:
                values.append([float(x) for x in line.split()])

        parts = np.array(values)
        if parts.shape != (4, 8):
            raise ValueError(f"matrix block {header.get('label')!r} has shape {parts.shape}, expected (4, 8)")

        r = header.get("r")
        states[header["label"]] = TwoSiteState(
            parts[:, 0::2] + 1j * parts[:, 1::2],
            r=None if r in (None, "None") else int(r),
            source=header.get("source", "file"),
        )

    return states
