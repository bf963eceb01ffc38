"""
Exact diagonalization of finite XYZ chains: Hamiltonian construction, thermal and
symmetry-broken ground states, reduced density matrices and correlators
"""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, ArpackNoConvergence

from config import ENGINE_CONFIG, SWEEP_CONFIG
from model_core import ChainSpec, to_pauli, energy_scale
from correlations import (
    TwoSiteState, CorrelatorSet, SymmetryError,
    correlators_from_pair, repair_density_matrix,
)

logger = logging.getLogger(__name__)

__all__ = [
    "SizeLimitError", "ConvergenceError", "SymmetryError",
    "HamiltonianMatrix", "GroundStateBundle", "ChainState", "CorrelatorSet",
    "build_hamiltonian", "ground_state", "thermal_state", "broken_state", "doublet_broken_state",
    "reduce_two_site", "reduce_one_site", "central_pair", "correlators",
    "parity_sectors", "parity_operator", "pair_sites",
    "energy_density", "energy_derivative", "product_state", "ghz_state", "purity",
]


class SizeLimitError(ValueError):
    """Raised when a chain is too long for the configured eigensolvers"""


class ConvergenceError(RuntimeError):
    """Raised when the eigensolver fails to converge"""


@dataclass
class HamiltonianMatrix:
    """Chain Hamiltonian in the sigma_z product basis; site 0 is the most significant bit"""
    matrix: Union[np.ndarray, sp.csr_matrix]
    spec: ChainSpec
    storage: str

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_sites(self) -> int:
        return self.spec.n_sites


@dataclass
class GroundStateBundle:
    """Lowest eigenpairs of a chain"""
    energies: np.ndarray
    vectors: np.ndarray
    gap: float
    degenerate: bool
    spec: ChainSpec

    @property
    def energy_density(self) -> float:
        return float(self.energies[0]) / self.spec.n_sites

    def ground(self) -> "ChainState":
        return ChainState(vectors=self.vectors[:, :1], weights=np.ones(1), n_sites=self.spec.n_sites)


@dataclass
class ChainState:
    """Mixture sum_m w_m |v_m><v_m| of chain vectors"""
    vectors: np.ndarray
    weights: np.ndarray
    n_sites: int
    source: str = "pure"


def _bit(states: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    return (states >> (n_sites - 1 - site)) & 1


def _bonds(n_sites: int, boundary: str) -> List[Tuple[int, int]]:
    bonds = [(j, j + 1) for j in range(n_sites - 1)]
    # A two-site ring keeps a single bond
    if boundary == "periodic" and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    return bonds


def _check_size(n_sites: int):
    limit = ENGINE_CONFIG["sparse_max_sites"]
    if n_sites > limit:
        raise SizeLimitError(
            f"n_sites={n_sites} exceeds the exact-diagonalization limit of {limit}; "
            f"use the closed-form family for the thermodynamic limit"
        )


def build_hamiltonian(spec: ChainSpec, storage: Optional[str] = None) -> HamiltonianMatrix:
    """
    Sparse assembly of

        H = sum_bonds [jx XX + jy YY + jz ZZ] - h sum_j Z_j - hx sum_j s_j X_j

    in the spec's own units. Dense storage up to `dense_max_sites`, sparse above.
    """
    _check_size(spec.n_sites)

    if storage is None:
        storage = "dense" if spec.n_sites <= ENGINE_CONFIG["dense_max_sites"] else "sparse"

    pauli = to_pauli(spec)
    scale = energy_scale(spec)
    n = spec.n_sites
    dim = 2 ** n

    states = np.arange(dim, dtype=np.int64)
    diagonal = np.zeros(dim)
    rows, cols, data = [], [], []

    for i, j in _bonds(n, spec.boundary):
        bi, bj = _bit(states, i, n), _bit(states, j, n)
        differ = bi != bj

        diagonal += pauli.jz * np.where(differ, -1.0, 1.0)

        # XX + YY flip both spins: jx + jy when the bits differ, jx - jy otherwise
        coefficient = pauli.jx + pauli.jy * np.where(differ, 1.0, -1.0)
        nonzero = coefficient != 0
        if np.any(nonzero):
            mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            rows.append(states[nonzero] ^ mask)
            cols.append(states[nonzero])
            data.append(coefficient[nonzero])

    for j in range(n):
        diagonal -= pauli.h * (1.0 - 2.0 * _bit(states, j, n))

        if pauli.hx:
            sign = (-1.0) ** j if spec.pinning == "staggered" else 1.0
            rows.append(states ^ (1 << (n - 1 - j)))
            cols.append(states)
            data.append(np.full(dim, -pauli.hx * sign))

    rows.append(states)
    cols.append(states)
    data.append(diagonal)

    matrix = sp.coo_matrix(
        (np.concatenate(data) * scale, (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()

    if storage == "dense":
        matrix = matrix.toarray()

    logger.debug(f"Built {storage} Hamiltonian: n_sites={n}, dimension={dim}")

    return HamiltonianMatrix(matrix=matrix, spec=spec, storage=storage)


def parity_sectors(n_sites: int) -> Tuple[np.ndarray, np.ndarray]:
    """Basis indices with even and odd numbers of flipped spins (Pi = +1 and -1)"""
    states = np.arange(2 ** n_sites, dtype=np.int64)
    popcount = np.zeros_like(states)
    for j in range(n_sites):
        popcount += _bit(states, j, n_sites)
    even = (popcount % 2) == 0
    return states[even], states[~even]


def parity_operator(n_sites: int) -> sp.dia_matrix:
    even, _ = parity_sectors(n_sites)
    diagonal = -np.ones(2 ** n_sites)
    diagonal[even] = 1.0
    return sp.diags(diagonal)


def _lowest_pairs(matrix, k: int, storage: str) -> Tuple[np.ndarray, np.ndarray]:
    dim = matrix.shape[0]
    k = min(k, dim)

    if storage == "dense" or dim <= 64:
        dense = matrix.toarray() if sp.issparse(matrix) else matrix
        try:
            return scipy.linalg.eigh(dense, subset_by_index=[0, k - 1])
        except np.linalg.LinAlgError as e:
            raise ConvergenceError(f"dense eigensolver failed: {e}")

    # Fixed start vector keeps sweeps reproducible
    v0 = np.random.default_rng(0).standard_normal(dim)
    try:
        energies, vectors = eigsh(matrix, k=k, which="SA", v0=v0, tol=ENGINE_CONFIG["eigsh_tol"])
    except ArpackNoConvergence as e:
        raise ConvergenceError(f"Lanczos eigensolver did not converge: {e}")

    order = np.argsort(energies)
    return energies[order], vectors[:, order]


def ground_state(H: HamiltonianMatrix, degeneracy_tol: Optional[float] = None) -> GroundStateBundle:
    """
    Two lowest eigenpairs. Without a pinning field the parity sectors are
    diagonalized separately so every returned vector is a parity eigenstate.
    """
    tol = ENGINE_CONFIG["degeneracy_tol"] if degeneracy_tol is None else degeneracy_tol
    dim = H.dimension

    if H.spec.hx == 0:
        candidates = []
        matrix = sp.csr_matrix(H.matrix) if H.storage == "sparse" else H.matrix
        for sector in parity_sectors(H.n_sites):
            block = matrix[sector][:, sector]
            energies, vectors = _lowest_pairs(block, 2, H.storage)
            for energy, vector in zip(energies, vectors.T):
                full = np.zeros(dim, dtype=vector.dtype)
                full[sector] = vector
                candidates.append((float(energy), full))

        # Stable sort keeps the even sector first on exact ties
        candidates.sort(key=lambda c: c[0])
        energies = np.array([c[0] for c in candidates[:2]])
        vectors = np.column_stack([c[1] for c in candidates[:2]])
    else:
        energies, vectors = _lowest_pairs(H.matrix, 2, H.storage)

    norms = np.linalg.norm(vectors, axis=0)
    vectors = vectors / norms

    gap = float(energies[1] - energies[0]) if len(energies) > 1 else float("inf")

    bundle = GroundStateBundle(
        energies=energies,
        vectors=vectors,
        gap=gap,
        degenerate=gap < tol,
        spec=H.spec,
    )

    logger.debug(f"Ground state: e0={bundle.energy_density:.12f}, gap={gap:.3e}, degenerate={bundle.degenerate}")

    return bundle


def thermal_state(bundle: GroundStateBundle) -> ChainState:
    """Zero-temperature limit: equal mixture of a (quasi-)degenerate doublet, else the ground state"""
    if bundle.spec.hx != 0:
        raise SymmetryError(f"thermal state needs hx = 0, got hx = {bundle.spec.hx}")

    if bundle.degenerate:
        return ChainState(vectors=bundle.vectors[:, :2], weights=np.array([0.5, 0.5]),
                          n_sites=bundle.spec.n_sites, source="thermal")

    return ChainState(vectors=bundle.vectors[:, :1], weights=np.ones(1),
                      n_sites=bundle.spec.n_sites, source="thermal")


def broken_state(spec: ChainSpec) -> GroundStateBundle:
    """Ground state selected by the pinning field hx > 0, gauged so that g_x >= 0"""
    if spec.hx <= 0:
        raise SymmetryError("broken_state needs a positive pinning field hx")

    # -hx sum s_j X_j favours +x on the pinned sublattice, so g_x >= 0 without further gauging
    return ground_state(build_hamiltonian(spec))


def _pinning_overlap(bra: np.ndarray, ket: np.ndarray, spec: ChainSpec) -> float:
    """<bra| sum_j s_j X_j |ket> with the spec's pinning pattern"""
    n = spec.n_sites
    states = np.arange(2 ** n, dtype=np.int64)
    total = 0.0
    for j in range(n):
        sign = (-1.0) ** j if spec.pinning == "staggered" else 1.0
        total += sign * float(np.real(np.vdot(bra, ket[states ^ (1 << (n - 1 - j))])))
    return total


def doublet_broken_state(bundle: GroundStateBundle) -> ChainState:
    """
    Finite-chain stand-in for the hx -> 0+ broken state: the superposition of the
    even and odd ground states with the largest pinning-field expectation.
    Needs an unpinned bundle whose two lowest vectors sit in opposite parity sectors.
    """
    if bundle.spec.hx != 0:
        raise SymmetryError(f"doublet construction needs hx = 0, got hx = {bundle.spec.hx}")
    if bundle.vectors.shape[1] < 2:
        raise SymmetryError("doublet construction needs the two lowest eigenvectors")

    P = parity_operator(bundle.spec.n_sites)
    first, second = bundle.vectors[:, 0], bundle.vectors[:, 1]
    parities = [float(np.real(np.vdot(v, P @ v))) for v in (first, second)]
    if parities[0] * parities[1] > 0:
        raise SymmetryError("the two lowest states share a parity sector; no doublet to superpose")

    sign = 1.0 if _pinning_overlap(first, second, bundle.spec) >= 0 else -1.0
    vector = (first + sign * second) / np.sqrt(2.0)

    logger.debug(f"Doublet broken state: splitting={bundle.gap:.3e}")

    return ChainState(vectors=vector[:, None], weights=np.ones(1), n_sites=bundle.spec.n_sites, source="doublet")


def reduce_two_site(state: ChainState, site_i: int, site_j: int) -> TwoSiteState:
    """Partial trace over every site except i < j"""
    n = state.n_sites
    if not 0 <= site_i < site_j < n:
        raise IndexError(f"need 0 <= i < j < {n}, got ({site_i}, {site_j})")

    rho = np.zeros((4, 4), dtype=complex)
    for weight, vector in zip(state.weights, state.vectors.T):
        tensor = np.moveaxis(vector.reshape([2] * n), [site_i, site_j], [0, 1]).reshape(4, -1)
        rho += weight * (tensor @ tensor.conj().T)

    return TwoSiteState(repair_density_matrix(rho), r=site_j - site_i, source=state.source)


def reduce_one_site(state: ChainState, site: int) -> np.ndarray:
    n = state.n_sites
    rho = np.zeros((2, 2), dtype=complex)
    for weight, vector in zip(state.weights, state.vectors.T):
        tensor = np.moveaxis(vector.reshape([2] * n), site, 0).reshape(2, -1)
        rho += weight * (tensor @ tensor.conj().T)
    return rho


def pair_sites(n_sites: int, r: int) -> Tuple[int, int]:
    """Central pair at distance r"""
    if not 1 <= r < n_sites:
        raise IndexError(f"distance r={r} out of range for n_sites={n_sites}")
    i = (n_sites - 1 - r) // 2
    return i, i + r


def correlators(state: ChainState, r: int) -> CorrelatorSet:
    """Correlators of the central pair at distance r"""
    i, j = pair_sites(state.n_sites, r)
    return correlators_from_pair(reduce_two_site(state, i, j))


def central_pair(state: ChainState, r: int) -> TwoSiteState:
    return reduce_two_site(state, *pair_sites(state.n_sites, r))


def energy_density(spec: ChainSpec) -> float:
    """Ground energy per site, in the spec's units"""
    return ground_state(build_hamiltonian(spec)).energy_density


def energy_derivative(spec: ChainSpec, parameter: str = "jz", step: Optional[float] = None) -> float:
    """Central difference of the ground energy density with respect to a coupling or field"""
    step = SWEEP_CONFIG["energy_step"] if step is None else step
    if parameter not in ("jx", "jy", "jz", "h"):
        raise ValueError(f"cannot differentiate with respect to {parameter!r}")

    value = getattr(spec, parameter)
    upper = energy_density(replace(spec, **{parameter: value + step}))
    lower = energy_density(replace(spec, **{parameter: value - step}))

    return (upper - lower) / (2 * step)


def product_state(n_sites: int, bits: Optional[List[int]] = None) -> ChainState:
    """Computational-basis product state (all |0> by default)"""
    bits = bits or [0] * n_sites
    index = int("".join(str(b) for b in bits), 2)
    vector = np.zeros(2 ** n_sites, dtype=complex)
    vector[index] = 1.0
    return ChainState(vectors=vector[:, None], weights=np.ones(1), n_sites=n_sites, source="synthetic")


def ghz_state(n_sites: int) -> ChainState:
    vector = np.zeros(2 ** n_sites, dtype=complex)
    vector[0] = vector[-1] = 1 / np.sqrt(2)
    return ChainState(vectors=vector[:, None], weights=np.ones(1), n_sites=n_sites, source="synthetic")


def purity(rho) -> float:
    matrix = rho.matrix if isinstance(rho, TwoSiteState) else np.asarray(rho)
    return float(np.real(np.trace(matrix @ matrix)))
