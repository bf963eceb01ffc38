"""
Sweep engine: parameter grids over chain models, one row of observables per
(family, L, h, r) point, dispatched over a worker pool
"""
import hashlib
import logging
from dataclasses import dataclass, field, asdict, fields as dataclass_fields
from multiprocessing import Pool
from typing import List, Dict, Any, Optional, Callable, Tuple

from config import (
    ConfigError, ENGINE_CONFIG, SWEEP_CONFIG, CLOSED_FORM_CONFIG,
    parse_key_value_text, parse_float, parse_int, get_worker_count,
)
from model_core import (
    ModelPreset, preset_spec, preset_from_entries,
    factorizing_field, critical_field, BOUNDARIES,
)
from ed_engine import (
    build_hamiltonian, ground_state, thermal_state, broken_state, doublet_broken_state,
    central_pair, energy_density, energy_derivative,
)
from correlations import (
    TwoSiteState, CorrelatorSet, correlators_from_pair, xstate_from_correlators,
    mutual_information, classical_correlation, symmetric_discord, concurrence,
    classical_correlation_bell_diagonal, mutual_information_bell_diagonal,
    xxz_correlators_from_energy,
)
from witness import witness
from xy_closed_form import XYPoint, xy_correlators, xy_energy_density

logger = logging.getLogger(__name__)

FAMILIES = ("thermal", "broken", "doublet", "closed_form")
OBSERVABLES = ("I", "C", "Q", "Q_sym", "concurrence", "witness", "correlators", "energy")
DEFAULT_OBSERVABLES = ("I", "C", "Q", "concurrence", "witness", "correlators", "energy")
AXES = ("h", "delta")
FORMATS = ("csv", "json")

SWEEP_KEYS = (
    "preset", "gamma", "delta", "jx", "jy", "jz", "sites", "hgrid", "deltagrid", "axis",
    "hx", "boundary", "rmax", "distances", "families", "observables", "workers", "format", "out",
)


def parse_grid(text: str, key: str = "hgrid", line: int = 0) -> List[float]:
    """`start:stop:step` (stop included) or a comma-separated list"""
    text = text.strip()

    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key} must be start:stop:step, got {text!r}", line)
        start, stop, step = (parse_float(p, key, line) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"{key} needs step > 0 and stop >= start, got {text!r}", line)
        count = int(round((stop - start) / step))
        return [round(start + i * step, 12) for i in range(count + 1)]

    values = [parse_float(p, key, line) for p in text.split(",") if p.strip()]
    if not values:
        raise ConfigError(f"{key} is empty", line)
    return values


def parse_list(text: str, key: str, line: int = 0) -> List[str]:
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ConfigError(f"{key} is empty", line)
    return items


def default_field_grid(preset: ModelPreset, start: float = 0.0, stop: float = 2.0) -> List[float]:
    """Phase-scan grid with refined windows around the critical and factorizing fields"""
    scan_step = SWEEP_CONFIG["scan_step"]
    window_step = SWEEP_CONFIG["window_step"]
    half_width = SWEEP_CONFIG["window_half_width"]

    grid = set(parse_grid(f"{start}:{stop}:{scan_step}"))

    landmarks = [critical_field(preset)]
    if preset.tag != "custom" and preset.tag != "xxz":
        landmarks.append(factorizing_field(preset_spec(preset, 2)))

    for center in landmarks:
        if center is None or center <= 0:
            continue
        lo, hi = max(start, center - half_width), min(stop, center + half_width)
        count = int(round((hi - lo) / window_step))
        grid.update(round(lo + i * window_step, 12) for i in range(count + 1))

    return sorted(grid)


@dataclass
class SweepConfig:
    """Everything that determines a sweep's rows"""
    preset: ModelPreset
    sites: List[int]
    fields: List[float]
    distances: List[int]
    families: List[str] = field(default_factory=lambda: ["thermal"])
    observables: List[str] = field(default_factory=lambda: list(DEFAULT_OBSERVABLES))
    axis: str = "h"
    deltas: List[float] = field(default_factory=list)
    hx: float = ENGINE_CONFIG["default_pinning_field"]
    boundary: str = "periodic"
    workers: int = 0
    format: str = "csv"
    out: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.axis == "delta" and (self.preset.tag != "xxz" or not self.deltas):
            raise ConfigError("axis = delta needs the xxz preset and a deltagrid")
        for family in self.families:
            if family not in FAMILIES:
                raise ConfigError(f"unknown family {family!r}; expected one of {FAMILIES}")
        for observable in self.observables:
            if observable not in OBSERVABLES:
                raise ConfigError(f"unknown observable {observable!r}; expected one of {OBSERVABLES}")
        if "closed_form" in self.families and not (self.preset.is_xy_family or self.preset.tag == "xxz"):
            raise ConfigError(f"closed_form family is available for xy, ising and xxz presets, not {self.preset.tag}")
        if "closed_form" in self.families and self.preset.is_xy_family and self.preset.gamma == 0:
            raise ConfigError("closed_form family excludes the isotropic line gamma = 0")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not self.distances or min(self.distances) < 1:
            raise ConfigError("distances must be positive integers")
        if max(self.distances) > CLOSED_FORM_CONFIG["r_max"]:
            raise ConfigError(f"distances are capped at {CLOSED_FORM_CONFIG['r_max']}")
        if not self.fields:
            raise ConfigError("field grid is empty")
        if self.hx <= 0 and "broken" in self.families:
            raise ConfigError("broken family needs a positive hx")
        for size in self.sites:
            if size < 2:
                raise ConfigError(f"sites must be at least 2, got {size}")
            if size > ENGINE_CONFIG["sparse_max_sites"]:
                raise ConfigError(f"sites={size} exceeds the exact-diagonalization limit {ENGINE_CONFIG['sparse_max_sites']}")
        if not self.sites and (set(self.families) != {"closed_form"} or not self.preset.is_xy_family):
            raise ConfigError("sites list is empty")

    @classmethod
    def from_text(cls, text: str, overrides: Optional[Dict[str, str]] = None) -> "SweepConfig":
        """Parse a sweep config file; `overrides` are raw values that win over the file"""
        entries = parse_key_value_text(text)
        for key, value in (overrides or {}).items():
            entries[key] = (value, 0)

        for key, (_, line) in entries.items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown key {key!r}", line)

        if "preset" not in entries:
            raise ConfigError("missing key 'preset'")
        if entries["preset"][0] == "xxz" and "delta" not in entries and "deltagrid" in entries:
            first = entries["deltagrid"][0].replace(":", ",").split(",")[0]
            entries["delta"] = (first, entries["deltagrid"][1])
        preset = preset_from_entries(entries)

        def value_of(key: str, default: str) -> str:
            return entries[key][0] if key in entries else default

        def line_of(key: str) -> int:
            return entries[key][1] if key in entries else 0

        sites = [parse_int(s, "sites", line_of("sites")) for s in parse_list(value_of("sites", "0"), "sites", line_of("sites"))]
        sites = [s for s in sites if s]

        fields_ = parse_grid(value_of("hgrid", ""), "hgrid", line_of("hgrid")) if "hgrid" in entries \
            else default_field_grid(preset)

        if "distances" in entries:
            distances = [parse_int(d, "distances", line_of("distances"))
                         for d in parse_list(value_of("distances", ""), "distances", line_of("distances"))]
        else:
            distances = list(range(1, parse_int(value_of("rmax", "1"), "rmax", line_of("rmax")) + 1))

        deltas = parse_grid(value_of("deltagrid", ""), "deltagrid", line_of("deltagrid")) if "deltagrid" in entries else []

        try:
            return cls(
                preset=preset,
                sites=sites,
                fields=fields_,
                distances=distances,
                families=parse_list(value_of("families", "thermal"), "families", line_of("families")),
                observables=parse_list(value_of("observables", ",".join(DEFAULT_OBSERVABLES)), "observables",
                                       line_of("observables")),
                axis=value_of("axis", "h"),
                deltas=deltas,
                hx=parse_float(value_of("hx", repr(ENGINE_CONFIG["default_pinning_field"])), "hx", line_of("hx")),
                boundary=value_of("boundary", "periodic"),
                workers=parse_int(value_of("workers", "0"), "workers", line_of("workers")),
                format=value_of("format", "csv"),
                out=entries["out"][0] if "out" in entries else None,
            )
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e))

    def to_text(self) -> str:
        """Canonical key = value form (the provenance hash is taken over this text)"""
        lines = [f"preset = {self.preset.tag}"]
        if self.preset.tag == "xy":
            lines.append(f"gamma = {repr(float(self.preset.gamma))}")
        if self.preset.tag == "xxz":
            lines.append(f"delta = {repr(float(self.preset.delta))}")
        if self.preset.tag == "custom":
            lines += [f"{key} = {repr(float(getattr(self.preset, key)))}" for key in ("jx", "jy", "jz")]
        lines += [
            f"sites = {','.join(str(s) for s in self.sites)}",
            f"hgrid = {','.join(repr(float(h)) for h in self.fields)}",
            f"axis = {self.axis}",
        ]
        if self.deltas:
            lines.append(f"deltagrid = {','.join(repr(float(d)) for d in self.deltas)}")
        lines += [
            f"hx = {repr(float(self.hx))}",
            f"boundary = {self.boundary}",
            f"distances = {','.join(str(r) for r in self.distances)}",
            f"families = {','.join(self.families)}",
            f"observables = {','.join(self.observables)}",
        ]
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


@dataclass
class SweepRow:
    """One parameter point's observables; missing values are None, never zero"""
    preset: str
    family: str
    L: Optional[int]
    h: float
    r: int
    gamma: Optional[float] = None
    delta: Optional[float] = None
    hx: float = 0.0
    I: Optional[float] = None
    C: Optional[float] = None
    Q: Optional[float] = None
    Q_sym: Optional[float] = None
    concurrence: Optional[float] = None
    witness_norm: Optional[float] = None
    g_x: Optional[float] = None
    g_z: Optional[float] = None
    g_xx: Optional[float] = None
    g_yy: Optional[float] = None
    g_zz: Optional[float] = None
    g_xz: Optional[float] = None
    energy_density: Optional[float] = None
    upper_bound: Optional[bool] = None
    theta: Optional[float] = None
    phi: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def sort_key(self):
        size = float("inf") if self.L is None else self.L
        return (size, self.h, self.delta if self.delta is not None else 0.0, self.r, self.family)


ROW_COLUMNS = [f.name for f in dataclass_fields(SweepRow)]


@dataclass(frozen=True)
class SweepTask:
    family: str
    size: Optional[int]
    h: float
    delta: Optional[float]


def _fill_measures(row: SweepRow, state: TwoSiteState, observables: List[str]):
    if "correlators" in observables:
        _fill_correlators(row, correlators_from_pair(state))

    if {"I", "C", "Q"} & set(observables):
        information = mutual_information(state)
        classical, result = classical_correlation(state)
        if "I" in observables:
            row.I = information
        if "C" in observables:
            row.C = classical
        if "Q" in observables:
            row.Q = information - classical
        row.upper_bound = result.upper_bound
        row.theta, row.phi = result.basis.theta, result.basis.phi

    if "Q_sym" in observables:
        row.Q_sym, _ = symmetric_discord(state)
    if "concurrence" in observables:
        row.concurrence = concurrence(state)
    if "witness" in observables:
        row.witness_norm = witness(state).trace_norm


def _fill_correlators(row: SweepRow, c: CorrelatorSet):
    row.g_x, row.g_z = c.g_x, c.g_z
    row.g_xx, row.g_yy, row.g_zz, row.g_xz = c.g_xx, c.g_yy, c.g_zz, c.g_xz


def xxz_bell_diagonal(n_sites: int, delta: float, boundary: str = "periodic") -> Tuple[float, float, float, float]:
    """(eps, c1, c2, c3) from the ED energy density and its delta derivative"""
    spec = preset_spec(ModelPreset("xxz", delta=delta), n_sites, boundary=boundary)
    eps = energy_density(spec)
    # jz = -delta / 2
    deps_ddelta = -0.5 * energy_derivative(spec, "jz")
    c1, c2, c3 = xxz_correlators_from_energy(eps, deps_ddelta, delta)
    return eps, c1, c2, c3


class SweepEngine:
    """Runs a SweepConfig and collects deterministic, sorted rows"""

    def __init__(self, config: SweepConfig):
        self.config = config
        self.rows: List[SweepRow] = []

    def tasks(self) -> List[SweepTask]:
        config = self.config
        axis_values = config.deltas if config.axis == "delta" else config.fields
        tasks = []

        for family in config.families:
            sizes = [None] if family == "closed_form" and config.preset.is_xy_family else config.sites
            for size in sizes:
                for value in axis_values:
                    if config.axis == "delta":
                        tasks.append(SweepTask(family, size, config.fields[0], value))
                    else:
                        tasks.append(SweepTask(family, size, value, config.preset.delta))
        return tasks

    def _base_row(self, task: SweepTask, r: int) -> SweepRow:
        preset = self.config.preset
        return SweepRow(
            preset=preset.tag,
            family=task.family,
            L=task.size,
            h=task.h,
            r=r,
            gamma=preset.gamma,
            delta=task.delta,
            hx=self.config.hx if task.family == "broken" else 0.0,
        )

    def compute_point(self, task: SweepTask) -> List[SweepRow]:
        """All distances at one (family, L, h) point; failures become error rows"""
        try:
            if task.family == "closed_form":
                return self._closed_form_rows(task)
            return self._ed_rows(task)
        except Exception as e:
            logger.warning(f"sweep point {task} failed: {type(e).__name__}: {e}")
            rows = []
            for r in self.config.distances:
                row = self._base_row(task, r)
                row.error = f"{type(e).__name__}: {e}"
                rows.append(row)
            return rows

    def _ed_state(self, task: SweepTask):
        config = self.config
        hx = config.hx if task.family == "broken" else 0.0
        spec = preset_spec(config.preset, task.size, h=task.h, hx=hx, boundary=config.boundary, delta=task.delta)

        if task.family == "broken":
            bundle = broken_state(spec)
            state = bundle.ground()
            state.source = "broken"
        elif task.family == "doublet":
            bundle = ground_state(build_hamiltonian(spec))
            state = doublet_broken_state(bundle)
        else:
            bundle = ground_state(build_hamiltonian(spec))
            state = thermal_state(bundle)
        return bundle, state

    def pair_states(self, task: SweepTask) -> Dict[str, TwoSiteState]:
        """Reduced pair states of an exact-diagonalization point, keyed by a readable label"""
        if task.family == "closed_form":
            raise ValueError("pair states are dumped for exact-diagonalization families only")

        _, state = self._ed_state(task)
        label = f"{task.family} L={task.size} h={repr(float(task.h))}"
        if task.delta is not None:
            label += f" delta={repr(float(task.delta))}"

        return {
            f"{label} r={r}": central_pair(state, r)
            for r in self.config.distances if r < task.size
        }

    def _ed_rows(self, task: SweepTask) -> List[SweepRow]:
        config = self.config
        bundle, state = self._ed_state(task)

        rows = []
        for r in config.distances:
            row = self._base_row(task, r)
            if r >= task.size:
                row.error = f"IndexError: distance {r} does not fit in {task.size} sites"
                rows.append(row)
                continue
            _fill_measures(row, central_pair(state, r), config.observables)
            if "energy" in config.observables:
                row.energy_density = bundle.energy_density
            rows.append(row)
        return rows

    def _closed_form_rows(self, task: SweepTask) -> List[SweepRow]:
        config = self.config
        rows = []

        if config.preset.is_xy_family:
            point = XYPoint(config.preset.gamma, task.h)
            corr = xy_correlators(point, max(config.distances))
            energy = xy_energy_density(point) if "energy" in config.observables else None

            for r in config.distances:
                row = self._base_row(task, r)
                _fill_measures(row, xstate_from_correlators(corr.at(r)), config.observables)
                row.energy_density = energy
                rows.append(row)
            return rows

        # xxz: Bell-diagonal nearest-neighbour pair from energy derivatives at zero field
        if task.h != 0:
            raise ValueError(f"xxz closed form needs h = 0, got h = {task.h}")
        eps, c1, c2, c3 = xxz_bell_diagonal(task.size, task.delta, config.boundary)
        pair = CorrelatorSet(r=1, g_x=0.0, g_z=0.0, g_xx=c1, g_yy=c2, g_zz=c3)

        for r in config.distances:
            row = self._base_row(task, r)
            if r != 1:
                row.error = "ValueError: energy-derivative correlators exist for r = 1 only"
                rows.append(row)
                continue

            state = xstate_from_correlators(pair)
            _fill_measures(row, state, [o for o in config.observables if o not in ("I", "C", "Q")])
            if "I" in config.observables:
                row.I = mutual_information_bell_diagonal(c1, c2, c3)
            if "C" in config.observables:
                row.C = classical_correlation_bell_diagonal(c1, c2, c3)
            if "Q" in config.observables:
                row.Q = mutual_information_bell_diagonal(c1, c2, c3) - classical_correlation_bell_diagonal(c1, c2, c3)
            row.upper_bound = False
            if "energy" in config.observables:
                row.energy_density = eps
            rows.append(row)
        return rows

    def run_sweep(self, progress_callback: Optional[Callable[[int, int], None]] = None) -> List[SweepRow]:
        """Run every task, in a process pool when more than one worker is configured"""
        tasks = self.tasks()
        workers = self.config.workers or get_worker_count()
        total = len(tasks)

        logger.info(f"Sweep {self.config.preset.label}: {total} points, {workers} worker(s)")

        rows: List[SweepRow] = []
        completed = 0

        if workers > 1 and total > 1:
            with Pool(processes=workers) as pool:
                for point_rows in pool.imap_unordered(self.compute_point, tasks):
                    rows.extend(point_rows)
                    completed += 1
                    logger.debug(f"Sweep point {completed}/{total} done")
                    if progress_callback:
                        progress_callback(completed, total)
        else:
            for task in tasks:
                rows.extend(self.compute_point(task))
                completed += 1
                logger.debug(f"Sweep point {completed}/{total} done")
                if progress_callback:
                    progress_callback(completed, total)

        rows.sort(key=lambda row: row.sort_key)
        failed = sum(1 for row in rows if row.error)
        if failed:
            logger.warning(f"{failed} of {len(rows)} rows carry errors")

        self.rows = rows
        return rows
