"""
Commutator witness of nonclassical correlations for spin pairs
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import svdvals

from config import WITNESS_CONFIG
from analysis import locate_extremum, ExtremumAtBoundaryError
from correlations import TwoSiteState, MeasurementBasis, xstate_from_correlators
from xy_closed_form import XYPoint, xy_correlator_set

logger = logging.getLogger(__name__)


@dataclass
class WitnessReport:
    trace_norm: float
    is_candidate_classical: bool
    tolerance: float


@dataclass
class WitnessProfile:
    """Witness norms along a field sweep"""
    family: str
    fields: np.ndarray
    norms: np.ndarray
    zeros: List[float] = field(default_factory=list)
    minimum_field: Optional[float] = None
    minimum_value: Optional[float] = None
    kink_field: Optional[float] = None


def witness_operator(state: TwoSiteState) -> np.ndarray:
    """W = [rho, rho_A (x) rho_B]"""
    product = np.kron(state.marginal(0), state.marginal(1))
    return state.matrix @ product - product @ state.matrix


def trace_norm(matrix: np.ndarray) -> float:
    """Tr sqrt(M M^dag), the sum of singular values"""
    return float(np.sum(svdvals(np.asarray(matrix))))


def witness(state: TwoSiteState, tolerance: Optional[float] = None) -> WitnessReport:
    tol = WITNESS_CONFIG["classicality_tol"] if tolerance is None else tolerance
    norm = trace_norm(witness_operator(state))
    return WitnessReport(trace_norm=norm, is_candidate_classical=norm < tol, tolerance=tol)


def product_projectors(bases: Sequence[MeasurementBasis]) -> List[np.ndarray]:
    """Pi_kl = |a_k><a_k| (x) |b_l><b_l| for one basis per party"""
    basis_a, basis_b = bases
    return [np.kron(pa, pb) for pa in basis_a.projectors() for pb in basis_b.projectors()]


def classicality_commutator_check(
    state: TwoSiteState,
    bases: Sequence[MeasurementBasis],
    tolerance: Optional[float] = None,
) -> bool:
    """True iff rho commutes with every product projector of the given local bases"""
    tol = WITNESS_CONFIG["classicality_tol"] if tolerance is None else tolerance
    worst = max(
        trace_norm(state.matrix @ projector - projector @ state.matrix)
        for projector in product_projectors(bases)
    )
    return worst < tol


def dephase(state: TwoSiteState, bases: Sequence[MeasurementBasis]) -> TwoSiteState:
    """Phi(rho) = sum_j Pi_j rho Pi_j"""
    matrix = sum(projector @ state.matrix @ projector for projector in product_projectors(bases))
    return TwoSiteState(matrix, r=state.r, source="dephased")


def _basis_from_vector(vector: np.ndarray) -> MeasurementBasis:
    # |b0> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>, up to a global phase
    vector = vector * np.exp(-1j * np.angle(vector[0])) if abs(vector[0]) > 0 else vector
    theta = 2 * np.arccos(np.clip(abs(vector[0]), 0.0, 1.0))
    phi = float(np.angle(vector[1])) if abs(vector[1]) > 0 else 0.0
    return MeasurementBasis.from_angles(theta, phi)


def marginal_eigenbases(state: TwoSiteState) -> Tuple[MeasurementBasis, MeasurementBasis]:
    """Local bases diagonalizing rho_A and rho_B (largest eigenvalue first)"""
    bases = []
    for keep in (0, 1):
        _, vectors = np.linalg.eigh(state.marginal(keep))
        bases.append(_basis_from_vector(vectors[:, -1]))
    return bases[0], bases[1]


def _second_difference_kink(fields: np.ndarray, values: np.ndarray) -> Optional[float]:
    if len(values) < 5:
        return None
    curvature = np.abs(np.diff(values, 2))
    return float(fields[1:-1][int(np.argmax(curvature))])


def witness_profile(family: str, fields: Sequence[float], states: Sequence[TwoSiteState],
                    tolerance: Optional[float] = None) -> WitnessProfile:
    """
    Witness norms for the states of one family along a field grid, with the
    strict zeros, the interpolated minimum and the strongest curvature point.
    Zeros are resolved only to the grid spacing.
    """
    tol = WITNESS_CONFIG["classicality_tol"] if tolerance is None else tolerance
    fields = np.asarray(fields, dtype=float)
    norms = np.array([witness(state, tol).trace_norm for state in states])

    profile = WitnessProfile(
        family=family,
        fields=fields,
        norms=norms,
        zeros=[float(h) for h, norm in zip(fields, norms) if norm < tol],
        kink_field=_second_difference_kink(fields, norms),
    )

    try:
        profile.minimum_field, profile.minimum_value = locate_extremum(fields, norms, kind="min")
    except ExtremumAtBoundaryError:
        index = int(np.argmin(norms))
        profile.minimum_field, profile.minimum_value = float(fields[index]), float(norms[index])
        logger.info(f"{family} witness minimum sits on the grid edge at h={fields[index]:g}")

    return profile


def closed_form_witness_states(gamma: float, fields: Sequence[float], r: int = 1) -> List[TwoSiteState]:
    """Thermal pair states of the infinite XY chain along a field grid"""
    return [xstate_from_correlators(xy_correlator_set(XYPoint(gamma, float(h)), r)) for h in fields]

