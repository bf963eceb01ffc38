"""
Post-processing of sweep series: numerical derivatives, extrema, scaling fits,
factorization and critical-point detection
"""
import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit, OptimizeWarning

from config import SWEEP_CONFIG

logger = logging.getLogger(__name__)


class FitError(ValueError):
    """Raised for degenerate or insufficient fit data"""


class NonUniformGridError(ValueError):
    """Raised when finite differences are requested on an uneven grid"""


class ExtremumAtBoundaryError(ValueError):
    """Raised when the extremum of a series is its first or last point"""


class DetectionNotFoundError(LookupError):
    """Raised when no crossing or zero exists in the scanned window"""


@dataclass
class FitResult:
    model: str
    coefficients: Dict[str, float]
    residual_norm: float
    data_range: Tuple[float, float]
    n_points: int

    def __post_init__(self):
        bad = [name for name, value in self.coefficients.items() if not np.isfinite(value)]
        if bad:
            raise FitError(f"{self.model} fit produced non-finite coefficients: {', '.join(bad)}")


@dataclass
class DerivativeSeries:
    x: np.ndarray
    values: np.ndarray
    step: float


@dataclass
class FactorizationEstimate:
    mean: float
    spread: float
    crossings: Dict[Tuple[int, int], float]
    expected: Optional[float] = None

    @property
    def deviation(self) -> Optional[float]:
        return None if self.expected is None else abs(self.mean - self.expected)


@dataclass
class CriticalEstimate:
    """Per-size extrema of a derivative series and the fits over sizes"""
    sizes: List[int]
    locations: List[float]
    depths: List[float]
    depth_fit: Optional[FitResult] = None
    shift_fit: Optional[FitResult] = None
    critical_field: Optional[float] = None
    extras: Dict[str, float] = field(default_factory=dict)


def uniform_step(x: Sequence[float], rtol: float = 1e-6) -> float:
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        raise NonUniformGridError(f"need at least 3 points, got {len(x)}")

    steps = np.diff(x)
    step = float(np.mean(steps))
    if step <= 0 or np.max(np.abs(steps - step)) > rtol * abs(step):
        raise NonUniformGridError("grid is not uniformly increasing")
    return step


def numerical_derivative(x: Sequence[float], values: Sequence[float], order: int = 1) -> DerivativeSeries:
    """Central differences inside, one-sided at the ends"""
    if order != 1:
        raise ValueError("only first derivatives are supported")

    step = uniform_step(x)
    derivative = np.gradient(np.asarray(values, dtype=float), step, edge_order=1)

    return DerivativeSeries(x=np.asarray(x, dtype=float), values=derivative, step=step)


def locate_extremum(x: Sequence[float], values: Sequence[float], kind: str = "min") -> Tuple[float, float]:
    """Vertex of the parabola through the extremal grid point and its neighbours"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)

    if kind not in ("min", "max"):
        raise ValueError(f"kind must be 'min' or 'max', got {kind!r}")
    if len(y) < 3:
        raise ExtremumAtBoundaryError("need at least 3 points")

    index = int(np.argmin(y) if kind == "min" else np.argmax(y))
    if index == 0 or index == len(y) - 1:
        raise ExtremumAtBoundaryError(f"{kind} at the boundary x={x[index]:g}")

    x0, x1, x2 = x[index - 1:index + 2]
    y0, y1, y2 = y[index - 1:index + 2]

    denominator = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denominator
    b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denominator
    c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denominator

    if a == 0:
        return float(x1), float(y1)

    vertex = -b / (2 * a)
    return float(vertex), float(c - b ** 2 / (4 * a))


def _least_squares(design: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, float]:
    coefficients, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise FitError("degenerate design matrix")
    residual = float(np.linalg.norm(design @ coefficients - target))
    return coefficients, residual


def fit_log_linear(sizes: Sequence[float], values: Sequence[float]) -> FitResult:
    """value = a + b log L"""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(sizes) < 3:
        raise FitError(f"log-linear fit needs at least 3 sizes, got {len(sizes)}")
    if np.any(sizes <= 0):
        raise FitError("sizes must be positive")

    design = np.column_stack([np.ones_like(sizes), np.log(sizes)])
    (a, b), residual = _least_squares(design, values)

    return FitResult("log_linear", {"a": float(a), "b": float(b)}, residual,
                     (float(sizes.min()), float(sizes.max())), len(sizes))


def fit_power_law(x: Sequence[float], values: Sequence[float]) -> FitResult:
    """value = prefactor * x^exponent, by least squares in log-log"""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise FitError("power-law fit needs at least 2 points")
    if np.any(values <= 0) or np.any(x <= 0):
        raise FitError("power-law fit needs positive data")

    design = np.column_stack([np.ones_like(x), np.log(x)])
    (log_prefactor, exponent), residual = _least_squares(design, np.log(values))

    return FitResult("power_law", {"prefactor": float(np.exp(log_prefactor)), "exponent": float(exponent)},
                     residual, (float(x.min()), float(x.max())), len(x))


def _exponential_plus_constant(r, a, b, c):
    return a + b * np.exp(-c * r)


def fit_exponential_plus_constant(r: Sequence[float], values: Sequence[float], relative: bool = False) -> FitResult:
    """
    value = a + b exp(-c r) with c >= 0. With relative=True each point is
    weighted by its own magnitude, so a tail decaying to zero pins a near 0.
    """
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(r) < 4:
        raise FitError("exponential fit needs at least 4 points")

    guess = [values[-1], values[0] - values[-1], 1.0]
    bounds = ([-np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf])
    sigma = None
    if relative:
        sigma = np.maximum(np.abs(values), SWEEP_CONFIG["relative_fit_floor"] * np.abs(values).max())

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(_exponential_plus_constant, r, values, p0=guess, sigma=sigma,
                                bounds=bounds, maxfev=20000)
    except (RuntimeError, ValueError) as e:
        raise FitError(f"exponential fit failed: {e}")

    residual = float(np.linalg.norm(_exponential_plus_constant(r, *popt) - values))

    return FitResult("exponential_plus_constant", {"a": float(popt[0]), "b": float(popt[1]), "c": float(popt[2])},
                     residual, (float(r.min()), float(r.max())), len(r))


def fit_factorization_law(
    fields: Sequence[float],
    distances: Sequence[int],
    values: Sequence[float],
    factorizing_field: float,
) -> FitResult:
    """
    log Q = log K + exponent log|h - h_f| + r log ratio, over all (h, r) points.
    Points at h_f itself or with non-positive Q are left out.
    """
    h = np.asarray(fields, dtype=float)
    r = np.asarray(distances, dtype=float)
    q = np.asarray(values, dtype=float)

    keep = (np.abs(h - factorizing_field) > 0) & (q > 0)
    if np.count_nonzero(~keep):
        logger.debug(f"factorization fit drops {np.count_nonzero(~keep)} points at h_f or with Q <= 0")
    h, r, q = h[keep], r[keep], q[keep]

    if len(q) < 4 or len(np.unique(r)) < 2:
        raise FitError("factorization fit needs at least 4 points over 2 or more distances")

    design = np.column_stack([np.ones_like(h), np.log(np.abs(h - factorizing_field)), r])
    (log_k, exponent, log_ratio), residual = _least_squares(design, np.log(q))

    return FitResult(
        "quadratic_factorization",
        {"prefactor": float(np.exp(log_k)), "exponent": float(exponent), "ratio": float(np.exp(log_ratio))},
        residual,
        (float(h.min()), float(h.max())),
        len(q),
    )


def _crossings(x: np.ndarray, difference: np.ndarray) -> List[float]:
    points = []
    for i in range(len(x) - 1):
        d0, d1 = difference[i], difference[i + 1]
        if d0 == 0:
            points.append(float(x[i]))
        elif d0 * d1 < 0:
            points.append(float(x[i] - d0 * (x[i + 1] - x[i]) / (d1 - d0)))
    if len(x) and difference[-1] == 0:
        points.append(float(x[-1]))
    return points


def find_factorization(
    fields: Sequence[float],
    curves: Dict[int, Sequence[float]],
    expected: Optional[float] = None,
    window: Optional[Tuple[float, float]] = None,
    spread_tol: Optional[float] = None,
) -> FactorizationEstimate:
    """
    Common crossing of the Q(h; r) curves. Every pair of distances must cross
    inside the window; one crossing per pair is picked so that the set is as
    tight as possible, and that set must fit within spread_tol.
    """
    if spread_tol is None:
        spread_tol = SWEEP_CONFIG["factorization_spread_tol"]

    x = np.asarray(fields, dtype=float)
    mask = np.ones_like(x, dtype=bool) if window is None else (x >= window[0]) & (x <= window[1])

    if len(curves) < 2:
        raise ValueError("factorization detection needs at least two distances")

    per_pair = {}
    for r1, r2 in itertools.combinations(sorted(curves), 2):
        difference = np.asarray(curves[r1], dtype=float)[mask] - np.asarray(curves[r2], dtype=float)[mask]
        found = _crossings(x[mask], difference)
        if not found:
            raise DetectionNotFoundError(f"curves r={r1} and r={r2} do not cross in the scanned window")
        per_pair[(r1, r2)] = found

    pairs = list(per_pair)
    best = min(
        itertools.product(*(per_pair[p] for p in pairs)),
        key=lambda combo: (max(combo) - min(combo), combo),
    )
    spread = float(max(best) - min(best))
    if spread > spread_tol:
        raise DetectionNotFoundError(
            f"pairwise crossings spread over {spread:.3e}, above the accepted {spread_tol:.1e}"
        )

    estimate = FactorizationEstimate(
        mean=float(np.mean(best)),
        spread=spread,
        crossings=dict(zip(pairs, (float(b) for b in best))),
        expected=expected,
    )

    logger.info(f"factorization crossing at h={estimate.mean:.6f} (spread {estimate.spread:.2e})")
    return estimate


def locate_critical_point(
    series: Dict[int, Tuple[Sequence[float], Sequence[float]]],
    kind: str = "min",
    critical_field: Optional[float] = None,
) -> CriticalEstimate:
    """
    Extremum of the first derivative of each size's series, then a log-linear
    fit of the extremal value over sizes and, with a known critical field,
    a power-law fit of the shift |h_c - h_m|.
    """
    sizes, locations, depths = [], [], []

    for size in sorted(series):
        x, values = series[size]
        derivative = numerical_derivative(x, values)
        location, depth = locate_extremum(derivative.x, derivative.values, kind=kind)
        sizes.append(int(size))
        locations.append(location)
        depths.append(depth)

    estimate = CriticalEstimate(sizes=sizes, locations=locations, depths=depths, critical_field=critical_field)

    if len(sizes) >= 3:
        estimate.depth_fit = fit_log_linear(sizes, depths)

    if critical_field is not None and len(sizes) >= 2:
        shifts = np.abs(critical_field - np.asarray(locations))
        if np.all(shifts > 0):
            estimate.shift_fit = fit_power_law(sizes, shifts)

    return estimate


def series_from_frame(frame: pd.DataFrame, observable: str, by: str = "h", **filters) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted (x, observable) arrays from sweep rows matching the filters; null rows are dropped"""
    selected = frame
    for column, value in filters.items():
        selected = selected[selected[column] == value]

    selected = selected.dropna(subset=[observable]).sort_values(by)
    if selected.empty:
        raise FitError(f"no rows with {observable} for {filters}")

    return selected[by].to_numpy(dtype=float), selected[observable].to_numpy(dtype=float)
