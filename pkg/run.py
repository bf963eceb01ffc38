#!/usr/bin/env python3
"""
Command-line entry point for the spin-chain discord toolkit

    python run.py sweep  --config configs/ising_thermal.cfg --out ising.csv
    python run.py derive --input ising.csv --observable C --out dC.csv
    python run.py fit    power_law --input shifts.csv --x L --y shift
    python run.py detect factorization --input xy07.csv
    python run.py report --input ising.csv --excel ising.xlsx
    python run.py report --selfcheck 1000
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from config import ConfigError, WITNESS_CONFIG, get_log_level, validate_config
from model_core import ModelPreset, preset_spec, factorizing_field, critical_field
from correlations import DensityMatrixError, mutual_information, classical_correlation
from sweep_engine import SweepConfig, SweepEngine
from analysis import (
    FitError, NonUniformGridError, ExtremumAtBoundaryError, DetectionNotFoundError,
    numerical_derivative, locate_extremum, fit_log_linear, fit_power_law,
    fit_exponential_plus_constant, fit_factorization_law, find_factorization,
    locate_critical_point, series_from_frame,
)
from export_utils import (
    ExportManager, load_rows, read_table, write_table, summarize_rows, write_density_matrices,
)
from dataset import StateGenerator

logger = logging.getLogger("run")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_NOT_FOUND = 3

FIT_MODELS = ("log_linear", "power_law", "exponential", "factorization")
DETECTIONS = ("factorization", "critical", "witness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Quantum discord and related correlations in spin-1/2 chain ground states",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    sweep = verbs.add_parser("sweep", help="compute observables over a parameter grid")
    sweep.add_argument("--config", help="key = value sweep configuration file")
    sweep.add_argument("--preset", choices=("xy", "ising", "xxz", "xyx", "custom"))
    sweep.add_argument("--gamma")
    sweep.add_argument("--delta")
    sweep.add_argument("--sites", help="comma list of chain lengths")
    sweep.add_argument("--hx", help="pinning field for the broken family")
    sweep.add_argument("--family", help="comma list of thermal, broken, doublet, closed_form")
    sweep.add_argument("--rmax", type=int, help="distances 1..rmax")
    sweep.add_argument("--hgrid", help="start:stop:step or comma list")
    sweep.add_argument("--workers")
    sweep.add_argument("--out")
    sweep.add_argument("--format", choices=("csv", "json"))
    sweep.add_argument("--dump-states", help="also write the reduced pair matrices of ED points to this file")

    derive = verbs.add_parser("derive", help="first derivative in h of one observable")
    derive.add_argument("--input", required=True)
    derive.add_argument("--observable", default="Q")
    derive.add_argument("--family")
    derive.add_argument("--r", type=int)
    derive.add_argument("--out")

    fit = verbs.add_parser("fit", help="fit a scaling law to tabular data")
    fit.add_argument("model", choices=FIT_MODELS)
    fit.add_argument("--input", required=True)
    fit.add_argument("--x", default="L")
    fit.add_argument("--y", default="Q")
    fit.add_argument("--where", action="append", default=[], help="column=value row filter (repeatable)")
    fit.add_argument("--hf", type=float, help="factorizing field for the factorization law")
    fit.add_argument("--window", type=float, default=0.05, help="half-width around h_f")
    fit.add_argument("--relative", action="store_true", help="weight the exponential fit by each value")
    fit.add_argument("--out")

    detect = verbs.add_parser("detect", help="factorizing field, critical point or witness zero from sweep rows")
    detect.add_argument("kind", choices=DETECTIONS)
    detect.add_argument("--input", required=True)
    detect.add_argument("--family", default=None)
    detect.add_argument("--observable", default="C")
    detect.add_argument("--extremum", choices=("min", "max"), default="min")
    detect.add_argument("--sites", type=int, help="restrict to one chain length")
    detect.add_argument("--r", type=int, default=1)
    detect.add_argument("--window", help="lo,hi field window")
    detect.add_argument("--spread", type=float, help="largest accepted spread of the pairwise crossings")
    detect.add_argument("--out")

    report = verbs.add_parser("report", help="summary of persisted rows, or the measure self-check")
    report.add_argument("--input")
    report.add_argument("--excel", help="write an Excel workbook instead of JSON")
    report.add_argument("--out")
    report.add_argument("--selfcheck", type=int, metavar="N", help="check I = C + Q on N random states")
    report.add_argument("--seed", type=int, default=0)

    return parser


def _emit(payload: Dict[str, Any], out: Optional[str]):
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logger.info(f"Wrote {out}")
    else:
        print(text)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def _filter(frame: pd.DataFrame, filters: Dict[str, Any]) -> pd.DataFrame:
    for column, value in filters.items():
        if value is None:
            continue
        if column not in frame.columns:
            raise ConfigError(f"unknown column {column!r}")
        frame = frame[frame[column] == value]
    return frame


def _parse_where(items: List[str], frame: pd.DataFrame) -> Dict[str, Any]:
    filters = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--where expects column=value, got {item!r}")
        column, raw = (part.strip() for part in item.split("=", 1))
        if column not in frame.columns:
            raise ConfigError(f"unknown column {column!r}")
        filters[column] = raw if frame[column].dtype == object else float(raw)
    return filters


def preset_from_frame(frame: pd.DataFrame) -> Optional[ModelPreset]:
    """The preset a sweep table was produced with, when the rows pin it down"""
    tags = frame["preset"].dropna().unique()
    if len(tags) != 1:
        return None

    tag = str(tags[0])
    if tag == "xy":
        return ModelPreset("xy", gamma=float(frame["gamma"].dropna().iloc[0]))
    if tag == "xxz":
        return ModelPreset("xxz", delta=float(frame["delta"].dropna().iloc[0]))
    if tag in ("ising", "xyx"):
        return ModelPreset(tag)
    return None


def _landmarks(frame: pd.DataFrame) -> Dict[str, Optional[float]]:
    preset = preset_from_frame(frame)
    if preset is None or preset.tag == "xxz":
        return {"factorizing_field": None, "critical_field": None}
    return {
        "factorizing_field": factorizing_field(preset_spec(preset, 2)),
        "critical_field": critical_field(preset),
    }


def cmd_sweep(args) -> int:
    text = ""
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            text = f.read()

    overrides = {
        "preset": args.preset, "gamma": args.gamma, "delta": args.delta, "sites": args.sites,
        "hx": args.hx, "families": args.family, "hgrid": args.hgrid, "workers": args.workers,
        "out": args.out, "format": args.format,
    }
    if args.rmax:
        overrides["distances"] = ",".join(str(r) for r in range(1, args.rmax + 1))
    overrides = {key: value for key, value in overrides.items() if value is not None}

    config = SweepConfig.from_text(text, overrides)
    engine = SweepEngine(config)

    total_points = len(engine.tasks())
    step = max(1, total_points // 10)

    def progress(done: int, total: int):
        if done % step == 0 or done == total:
            logger.info(f"{done}/{total} points")

    rows = engine.run_sweep(progress_callback=progress)

    exporter = ExportManager(config)
    filename = exporter.export_rows(rows, config.out, fmt=config.format)
    logger.info(f"Wrote {len(rows)} rows to {filename}")

    if args.dump_states:
        states = {}
        for task in engine.tasks():
            if task.family != "closed_form":
                states.update(engine.pair_states(task))
        write_density_matrices(states, args.dump_states)
        logger.info(f"Wrote {len(states)} pair matrices to {args.dump_states}")

    failed = sum(1 for row in rows if row.error)
    return EXIT_NUMERICAL if failed == len(rows) and rows else EXIT_OK


def cmd_derive(args) -> int:
    frame, _ = load_rows(args.input)
    frame = _filter(frame, {"family": args.family, "r": args.r})
    frame = frame[frame["error"].isna()]

    pieces = []
    group_keys = ["family", "L", "r", "delta"]
    for keys, group in frame.groupby(group_keys, dropna=False, sort=True):
        x, values = series_from_frame(group, args.observable)
        derivative = numerical_derivative(x, values)
        piece = pd.DataFrame({"h": derivative.x, f"d{args.observable}_dh": derivative.values})
        for key, value in zip(group_keys, keys):
            piece.insert(len(piece.columns) - 2, key, value)
        pieces.append(piece)

    if not pieces:
        raise FitError(f"no rows with {args.observable} to differentiate")

    text = write_table(pd.concat(pieces, ignore_index=True), args.out)
    if args.out:
        logger.info(f"Wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _read_table(filename: str) -> pd.DataFrame:
    if filename.endswith(".json"):
        return load_rows(filename)[0]
    return read_table(filename)[0]


def cmd_fit(args) -> int:
    frame = _read_table(args.input)
    frame = _filter(frame, _parse_where(args.where, frame))
    if "error" in frame.columns:
        frame = frame[frame["error"].isna()]

    if args.model == "factorization":
        h_f = args.hf if args.hf is not None else _landmarks(frame)["factorizing_field"]
        if h_f is None:
            raise ConfigError("factorization fit needs --hf for this preset")
        window = frame[(frame["h"] - h_f).abs() <= args.window].dropna(subset=[args.y])
        result = fit_factorization_law(window["h"], window["r"], window[args.y], h_f)
    else:
        data = frame.dropna(subset=[args.x, args.y]).sort_values(args.x)
        x, y = data[args.x].to_numpy(dtype=float), data[args.y].to_numpy(dtype=float)
        if args.model == "log_linear":
            result = fit_log_linear(x, y)
        elif args.model == "power_law":
            result = fit_power_law(x, y)
        else:
            result = fit_exponential_plus_constant(x, y, relative=args.relative)

    _emit(asdict(result), args.out)
    return EXIT_OK


def _window(text: Optional[str]):
    if not text:
        return None
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--window expects lo,hi, got {text!r}")
    return lo, hi


def cmd_detect(args) -> int:
    frame, _ = load_rows(args.input)
    frame = frame[frame["error"].isna()]
    landmarks = _landmarks(frame)

    if args.kind == "factorization":
        selected = _filter(frame, {"family": args.family or "thermal", "L": args.sites})
        if selected.empty:
            raise DetectionNotFoundError("no rows for the requested family and size")
        if selected["L"].notna().any():
            # one curve per distance: the largest chain unless a size was requested
            selected = selected[selected["L"] == selected["L"].max()]
        pivot = selected.pivot_table(index="h", columns="r", values="Q", aggfunc="first").dropna()
        curves = {int(r): pivot[r].to_numpy() for r in pivot.columns}
        estimate = find_factorization(pivot.index.to_numpy(dtype=float), curves,
                                      expected=landmarks["factorizing_field"], window=_window(args.window),
                                      spread_tol=args.spread)
        payload = {
            "factorizing_field": estimate.mean,
            "spread": estimate.spread,
            "crossings": {f"{a}-{b}": h for (a, b), h in estimate.crossings.items()},
            "expected": estimate.expected,
            "deviation": estimate.deviation,
        }

    elif args.kind == "critical":
        selected = _filter(frame, {"family": args.family or "thermal", "r": args.r})
        series = {}
        for size, group in selected.groupby("L"):
            series[int(size)] = series_from_frame(group, args.observable)
        if not series:
            raise DetectionNotFoundError("no finite-size rows to locate a critical point")
        estimate = locate_critical_point(series, kind=args.extremum, critical_field=landmarks["critical_field"])
        payload = asdict(estimate)

    else:
        selected = _filter(frame, {"family": args.family or "broken", "L": args.sites, "r": args.r})
        fields, norms = series_from_frame(selected, "witness_norm")
        tol = WITNESS_CONFIG["classicality_tol"]
        zeros = [float(h) for h, norm in zip(fields, norms) if norm < tol]
        try:
            minimum_field, minimum_value = locate_extremum(fields, norms, kind="min")
        except ExtremumAtBoundaryError:
            index = int(np.argmin(norms))
            minimum_field, minimum_value = float(fields[index]), float(norms[index])
        if not zeros and minimum_value >= tol:
            logger.info(f"witness minimum {minimum_value:.3e} at h={minimum_field:.6f} is not a zero")
        payload = {"zeros": zeros, "minimum_field": minimum_field, "minimum_value": minimum_value,
                   "factorizing_field": landmarks["factorizing_field"]}
        if not zeros:
            _emit(payload, args.out)
            raise DetectionNotFoundError("witness has no zero on the grid")

    _emit(payload, args.out)
    return EXIT_OK


def run_selfcheck(count: int, seed: int = 0) -> Dict[str, Any]:
    """I = C + Q and 0 <= C <= I on random states of every rank"""
    generator = StateGenerator(seed)
    failures = []
    not_converged = 0

    for sample in generator.random_states(count):
        information = mutual_information(sample.state)
        classical, result = classical_correlation(sample.state)
        discord = information - classical
        if not result.converged:
            not_converged += 1
        if abs(information - (classical + discord)) > 1e-12 or not -1e-12 <= classical <= information + 1e-12:
            failures.append({"id": sample.id, "I": information, "C": classical, "Q": discord})

    return {"states": count, "seed": seed, "failures": failures, "not_converged": not_converged}


def cmd_report(args) -> int:
    if args.selfcheck:
        result = run_selfcheck(args.selfcheck, args.seed)
        _emit(result, args.out)
        return EXIT_NUMERICAL if result["failures"] else EXIT_OK

    if not args.input:
        raise ConfigError("report needs --input or --selfcheck")

    frame, provenance = load_rows(args.input)
    summary = summarize_rows(frame)
    summary["config_hash"] = provenance.get("config_hash")
    summary.update(_landmarks(frame))

    exporter = ExportManager()
    if args.excel:
        filename = exporter.export_excel_workbook(frame, summary, filename=args.excel)
    else:
        filename = exporter.export_summary_report(summary, filename=args.out)
    logger.info(f"Wrote {filename}")
    return EXIT_OK


COMMANDS = {
    "sweep": cmd_sweep,
    "derive": cmd_derive,
    "fit": cmd_fit,
    "detect": cmd_detect,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one verb and map failures to exit codes"""
    args = build_parser().parse_args(argv)

    logging.basicConfig(level=get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    status = validate_config()
    if not status["valid"]:
        for error in status["errors"]:
            logger.error(error)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.verb](args)
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"Cannot access file: {e}")
        return EXIT_CONFIG
    except DetectionNotFoundError as e:
        logger.error(f"Not found: {e}")
        return EXIT_NOT_FOUND
    except (FitError, NonUniformGridError, ExtremumAtBoundaryError, DensityMatrixError,
            ArithmeticError, RuntimeError, ValueError, KeyError) as e:
        logger.error(f"Numerical failure: {type(e).__name__}: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
