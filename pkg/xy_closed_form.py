"""
Thermodynamic-limit solution of the transverse-field XY chain

    H = -sum_j [(1+gamma)/2 X_j X_j+1 + (1-gamma)/2 Y_j Y_j+1] - h sum_j Z_j

via Jordan-Wigner fermions: magnetization and energy from one-dimensional
quadratures, two-point correlators as Toeplitz determinants of the kernel G(R).
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict

import numpy as np
from scipy.integrate import quad
from scipy.linalg import toeplitz

from config import CLOSED_FORM_CONFIG
from correlations import CorrelatorSet, discord_closed_form_xy

logger = logging.getLogger(__name__)


class QuadratureError(ArithmeticError):
    """Raised when a kernel quadrature misses the accepted error"""


class DeterminantRangeError(ArithmeticError):
    """Raised when a Toeplitz determinant leaves the representable range"""


@dataclass(frozen=True)
class XYPoint:
    gamma: float
    h: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.h < 0:
            raise ValueError(f"h must be non-negative, got {self.h}")


@dataclass
class XYCorrelators:
    point: XYPoint
    sigma_z: float
    r: np.ndarray
    gxx: np.ndarray
    gyy: np.ndarray
    gzz: np.ndarray

    def at(self, r: int) -> CorrelatorSet:
        index = int(r) - 1
        return CorrelatorSet(
            r=int(r), g_x=0.0, g_z=self.sigma_z,
            g_xx=float(self.gxx[index]), g_yy=float(self.gyy[index]), g_zz=float(self.gzz[index]),
            g_xz=0.0,
        )


def _omega(k, gamma: float, h: float):
    return np.sqrt((h - np.cos(k)) ** 2 + gamma ** 2 * np.sin(k) ** 2)


def _integrate(integrand, weight=None, wvar=None) -> float:
    """(1/pi) * integral over [0, pi], with QUADPACK oscillatory weights when given"""
    kwargs = {
        "epsabs": CLOSED_FORM_CONFIG["quad_epsabs"],
        "epsrel": CLOSED_FORM_CONFIG["quad_epsrel"],
        "limit": CLOSED_FORM_CONFIG["quad_limit"],
    }
    if weight is not None:
        kwargs.update(weight=weight, wvar=wvar)

    value, error = quad(integrand, 0.0, np.pi, **kwargs)

    if not np.isfinite(value) or error > CLOSED_FORM_CONFIG["accepted_error"]:
        raise QuadratureError(f"quadrature error estimate {error:.2e} above accepted {CLOSED_FORM_CONFIG['accepted_error']:.0e}")

    return value / np.pi


def _longitudinal(k, gamma, h):
    w = _omega(k, gamma, h)
    # h = 1: omega vanishes at k = 0 where the ratio tends to 0
    return np.where(w > 0, (h - np.cos(k)) / np.where(w > 0, w, 1.0), 0.0)


def _transverse(k, gamma, h):
    w = _omega(k, gamma, h)
    return np.where(w > 0, gamma * np.sin(k) / np.where(w > 0, w, 1.0), 0.0)


@lru_cache(maxsize=4096)
def _kernel_parts(gamma: float, h: float, distance: int):
    """Cosine and sine transforms (1/pi) int cos(kR) f(k), (1/pi) int sin(kR) g(k)"""
    f = lambda k: float(_longitudinal(k, gamma, h))
    g = lambda k: float(_transverse(k, gamma, h))

    if distance == 0:
        return _integrate(f), 0.0

    return (
        _integrate(f, weight="cos", wvar=distance),
        _integrate(g, weight="sin", wvar=distance),
    )


def xy_gr(p: XYPoint, distance: int) -> float:
    """Fermionic kernel G(R) = -(1/pi) int [cos(kR)(h - cos k) - gamma sin(kR) sin k] / omega dk"""
    cosine, sine = _kernel_parts(p.gamma, p.h, abs(int(distance)))
    return -cosine + math.copysign(1.0, distance) * sine if distance else -cosine


def xy_magnetization(p: XYPoint) -> float:
    """<sigma_z> = -G(0)"""
    return -xy_gr(p, 0)


def xy_energy_density(p: XYPoint) -> float:
    return -_integrate(lambda k: float(_omega(k, p.gamma, p.h)))


def toeplitz_determinant(column: np.ndarray, row: np.ndarray) -> float:
    """
    Determinant via slogdet; a vanishing determinant is an exact zero, an
    underflow is logged, a magnitude above one is an error.
    """
    sign, logabs = np.linalg.slogdet(toeplitz(column, row))

    if np.isnan(logabs) or logabs == np.inf:
        raise DeterminantRangeError(f"Toeplitz determinant not finite (log|det| = {logabs})")
    if logabs == -np.inf:
        return 0.0
    if logabs > 1e-8:
        raise DeterminantRangeError(f"correlator magnitude exp({logabs:.3e}) exceeds one")
    if logabs < np.log(np.finfo(float).tiny):
        logger.warning(f"Toeplitz determinant underflows (log|det| = {logabs:.1f}); reporting 0")
        return 0.0

    return float(sign * np.exp(logabs))


def _correlators_from_kernel(kernel: Dict[int, float], sigma_z: float, r: int):
    xx = toeplitz_determinant(
        np.array([kernel[k + 1] for k in range(r)]),
        np.array([kernel[1 - k] for k in range(r)]),
    )
    yy = toeplitz_determinant(
        np.array([kernel[k - 1] for k in range(r)]),
        np.array([kernel[-k - 1] for k in range(r)]),
    )
    zz = sigma_z ** 2 - kernel[r] * kernel[-r]
    return xx, yy, zz


def xy_correlators(p: XYPoint, r_max: int) -> XYCorrelators:
    """<sigma_z> and gxx, gyy, gzz for r = 1..r_max in the infinite chain"""
    if not 1 <= r_max <= CLOSED_FORM_CONFIG["r_max"]:
        raise ValueError(f"r_max must lie in [1, {CLOSED_FORM_CONFIG['r_max']}], got {r_max}")

    kernel = {d: xy_gr(p, d) for d in range(-r_max, r_max + 1)}
    sigma_z = -kernel[0]

    rows = [_correlators_from_kernel(kernel, sigma_z, r) for r in range(1, r_max + 1)]
    gxx, gyy, gzz = (np.array(column) for column in zip(*rows))

    return XYCorrelators(point=p, sigma_z=sigma_z, r=np.arange(1, r_max + 1), gxx=gxx, gyy=gyy, gzz=gzz)


def xy_finite_correlators(p: XYPoint, n_sites: int, r_max: int) -> XYCorrelators:
    """
    Same construction on an even periodic ring, in the even-parity sector
    (antiperiodic fermion momenta k = (2m-1) pi / N).
    """
    if n_sites % 2:
        raise ValueError("finite-ring correlators need an even number of sites")
    if not 1 <= r_max < n_sites:
        raise ValueError(f"r_max must lie in [1, {n_sites - 1}], got {r_max}")

    k = (2 * np.arange(1, n_sites // 2 + 1) - 1) * np.pi / n_sites
    w = _omega(k, p.gamma, p.h)

    def kernel_at(d: int) -> float:
        summand = (np.cos(k * d) * (p.h - np.cos(k)) - p.gamma * np.sin(k * d) * np.sin(k)) / w
        return float(-2.0 / n_sites * np.sum(summand))

    kernel = {d: kernel_at(d) for d in range(-r_max, r_max + 1)}
    sigma_z = -kernel[0]

    rows = [_correlators_from_kernel(kernel, sigma_z, r) for r in range(1, r_max + 1)]
    gxx, gyy, gzz = (np.array(column) for column in zip(*rows))

    return XYCorrelators(point=p, sigma_z=sigma_z, r=np.arange(1, r_max + 1), gxx=gxx, gyy=gyy, gzz=gzz)


def xy_correlator_set(p: XYPoint, r: int) -> CorrelatorSet:
    return xy_correlators(p, r).at(r)


def xy_discord_profile(p: XYPoint, r_max: int) -> np.ndarray:
    """Thermal-state discord Q(r) for r = 1..r_max"""
    corr = xy_correlators(p, r_max)
    return np.array([discord_closed_form_xy(corr.at(r)) for r in corr.r])
