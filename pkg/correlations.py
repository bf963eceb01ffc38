"""
Information-theoretic measures on two-qubit states: entropies, mutual information,
measurement-conditioned entropy, classical correlation, quantum discord (numeric and
closed form), symmetric discord and concurrence
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple, Dict, Any, List

import numpy as np
from scipy.linalg import svdvals
from scipy.optimize import minimize

from config import ENGINE_CONFIG, OPTIMIZER_CONFIG

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"i": IDENTITY, "x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

SPIN_FLIP = np.kron(SIGMA_Y, SIGMA_Y)

# Entries allowed to be nonzero in an X-shaped matrix
X_MASK = np.eye(4, dtype=bool) | np.fliplr(np.eye(4, dtype=bool))


class DensityMatrixError(ValueError):
    """Raised when a matrix is not a valid density matrix within tolerance"""


class SymmetryError(ValueError):
    """Raised when an operation requires a Z2-symmetric (thermal) state or spec"""


def repair_density_matrix(
    matrix: np.ndarray,
    psd_tol: float = ENGINE_CONFIG["psd_tol"],
    trace_tol: float = ENGINE_CONFIG["trace_tol"],
) -> np.ndarray:
    """
    Validate a density matrix, clipping round-off negative eigenvalues.

    Eigenvalues in [-psd_tol, 0) are set to zero and the result renormalized;
    anything more negative raises DensityMatrixError.
    """
    rho = np.asarray(matrix, dtype=complex)

    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError(f"expected a square matrix, got shape {rho.shape}")

    hermiticity = np.max(np.abs(rho - rho.conj().T))
    if hermiticity > psd_tol:
        raise DensityMatrixError(f"matrix is not Hermitian (max |rho - rho^dag| = {hermiticity:.3e})")
    rho = (rho + rho.conj().T) / 2

    trace = np.trace(rho).real
    if abs(trace - 1.0) > max(trace_tol, psd_tol):
        raise DensityMatrixError(f"trace is {trace!r}, expected 1")

    eigenvalues, eigenvectors = np.linalg.eigh(rho)
    if eigenvalues[0] < -psd_tol:
        raise DensityMatrixError(f"negative eigenvalue {eigenvalues[0]:.3e} below tolerance -{psd_tol:g}")

    if eigenvalues[0] < 0:
        eigenvalues = np.clip(eigenvalues, 0.0, None)
        rho = (eigenvectors * eigenvalues) @ eigenvectors.conj().T

    return rho / np.trace(rho).real


@dataclass
class CorrelatorSet:
    """Single-site magnetizations and two-point correlators of a pair at distance r"""
    r: Optional[int]
    g_x: float
    g_z: float
    g_xx: float
    g_yy: float
    g_zz: float
    g_xz: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def symmetric(self) -> bool:
        tol = ENGINE_CONFIG["psd_tol"]
        return abs(self.g_x) < tol and abs(self.g_xz) < tol


@dataclass
class TwoSiteState:
    """4x4 density matrix of a spin pair in the basis |00>, |01>, |10>, |11>"""
    matrix: np.ndarray
    r: Optional[int] = None
    source: str = "synthetic"

    def __post_init__(self):
        if np.shape(self.matrix) != (4, 4):
            raise DensityMatrixError(f"two-site state must be 4x4, got {np.shape(self.matrix)}")
        self.matrix = repair_density_matrix(self.matrix)

    def marginal(self, keep: int) -> np.ndarray:
        return partial_trace_two_qubit(self.matrix, keep)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)


@dataclass(frozen=True)
class MeasurementBasis:
    """
    Projective qubit measurement {|b0><b0|, |b1><b1|} with
    |b0> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
    """
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValueError(f"phi must lie in [0, 2pi), got {self.phi}")

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "MeasurementBasis":
        """Fold arbitrary real angles into the canonical ranges"""
        theta = float(np.mod(theta, 2 * np.pi))
        if theta > np.pi:
            theta = 2 * np.pi - theta
            phi += np.pi
        phi = float(np.mod(phi, 2 * np.pi))
        if phi >= 2 * np.pi:
            phi = 0.0
        return cls(theta, phi)

    def vectors(self) -> np.ndarray:
        return basis_vectors(np.array([self.theta]), np.array([self.phi]))[0]

    def projectors(self) -> Tuple[np.ndarray, np.ndarray]:
        v = self.vectors()
        return np.outer(v[0], v[0].conj()), np.outer(v[1], v[1].conj())


@dataclass
class MeasurementResult:
    """Optimizer outcome for classical correlation and discord"""
    value: float
    bases: Tuple[MeasurementBasis, ...]
    iterations: int
    method: str
    converged: bool
    upper_bound: bool = False

    @property
    def basis(self) -> MeasurementBasis:
        return self.bases[-1]


@dataclass
class CorrelationReport:
    """Bundle of the pairwise measures of one state"""
    mutual_information: float
    classical_correlation: float
    discord: float
    concurrence: float
    symmetric_discord: Optional[float] = None
    upper_bound: bool = False
    theta: Optional[float] = None
    phi: Optional[float] = None
    iterations: int = 0
    method: str = ""
    converged: bool = True
    extra: Dict[str, Any] = field(default_factory=dict)


def basis_vectors(thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Array of shape (n, 2, 2): [basis, outcome k, component]"""
    c = np.cos(np.asarray(thetas) / 2)
    s = np.sin(np.asarray(thetas) / 2)
    phase = np.exp(1j * np.asarray(phis))

    vectors = np.empty((c.size, 2, 2), dtype=complex)
    vectors[:, 0, 0] = c
    vectors[:, 0, 1] = phase * s
    vectors[:, 1, 0] = s
    vectors[:, 1, 1] = -phase * c
    return vectors


def partial_trace_two_qubit(rho: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 state of qubit `keep` (0 = A, 1 = B)"""
    tensor = np.asarray(rho).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ijkj->ik", tensor)
    if keep == 1:
        return np.einsum("ijil->jl", tensor)
    raise ValueError(f"keep must be 0 or 1, got {keep}")


def entropy_from_eigenvalues(eigenvalues: np.ndarray) -> float:
    p = np.asarray(eigenvalues, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(p):
    """H(p) in bits, elementwise, with 0 log 0 = 0"""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, terms)


def von_neumann_entropy(rho) -> float:
    """S(rho) = -Tr rho log2 rho in bits"""
    matrix = rho.matrix if isinstance(rho, TwoSiteState) else np.asarray(rho)
    eigenvalues = np.linalg.eigvalsh((matrix + matrix.conj().T) / 2)

    if eigenvalues[0] < -ENGINE_CONFIG["psd_tol"]:
        raise DensityMatrixError(f"negative eigenvalue {eigenvalues[0]:.3e} below tolerance")

    return entropy_from_eigenvalues(eigenvalues)


def mutual_information(state: TwoSiteState) -> float:
    """I = S(rho_A) + S(rho_B) - S(rho)"""
    return max(0.0, (
        von_neumann_entropy(state.marginal(0))
        + von_neumann_entropy(state.marginal(1))
        - von_neumann_entropy(state.matrix)
    ))


def _conditional_states(rho: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Unnormalized states of A after outcome k on B, shape (n, 2, 2, 2) = [basis, k, a, c]"""
    tensor = rho.reshape(2, 2, 2, 2)
    return np.einsum("ajcl,nkl,nkj->nkac", tensor, vectors, vectors.conj())


def _weighted_entropies(blocks: np.ndarray) -> np.ndarray:
    """sum_k p_k S(rho_k) from unnormalized 2x2 blocks, vectorized over the leading axis"""
    floor = OPTIMIZER_CONFIG["outcome_floor"]

    p = np.real(blocks[..., 0, 0] + blocks[..., 1, 1])
    det = np.real(blocks[..., 0, 0] * blocks[..., 1, 1] - blocks[..., 0, 1] * blocks[..., 1, 0])

    safe_p = np.where(p > floor, p, 1.0)
    discriminant = np.clip(1.0 - 4.0 * det / safe_p ** 2, 0.0, 1.0)
    larger = (1.0 + np.sqrt(discriminant)) / 2

    entropies = np.where(p > floor, binary_entropy(larger), 0.0)
    return np.sum(np.where(p > floor, p, 0.0) * entropies, axis=-1)


def conditioned_entropy(state: TwoSiteState, basis: MeasurementBasis) -> float:
    """sum_k p_k S(rho_k) for a projective measurement on party B"""
    vectors = basis_vectors(np.array([basis.theta]), np.array([basis.phi]))
    return float(_weighted_entropies(_conditional_states(state.matrix, vectors))[0])


def conditioned_entropy_grid(state: TwoSiteState, thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Conditioned entropy on the (theta, phi) mesh, shape (len(thetas), len(phis))"""
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vectors = basis_vectors(tt.ravel(), pp.ravel())
    values = _weighted_entropies(_conditional_states(state.matrix, vectors))
    return values.reshape(tt.shape)


def measurement_grid(step: float) -> Tuple[np.ndarray, np.ndarray]:
    n_theta = int(round(np.pi / step))
    n_phi = int(round(2 * np.pi / step))
    return np.linspace(0.0, np.pi, n_theta + 1), np.arange(n_phi) * (2 * np.pi / n_phi)


def is_x_state(state: TwoSiteState, tol: float = ENGINE_CONFIG["psd_tol"]) -> bool:
    """True when only the diagonal and anti-diagonal carry weight"""
    return bool(np.max(np.abs(state.matrix[~X_MASK])) < tol)


def _pick_best(candidates: List[Tuple[float, Tuple[float, ...]]]) -> Tuple[float, Tuple[float, ...]]:
    # Lowest value; near-ties go to the lexicographically smallest angles
    lowest = min(value for value, _ in candidates)
    ties = [c for c in candidates if c[0] <= lowest + OPTIMIZER_CONFIG["value_tol"]]
    return min(ties, key=lambda c: (c[1], c[0]))


def _refine(objective, grid_values: np.ndarray, point_at, canonical) -> Tuple[float, tuple, int, str, bool]:
    """Grid minimum followed by Nelder-Mead from the best cells"""
    order = np.argsort(grid_values, kind="stable")
    candidates = [(float(grid_values[order[0]]), canonical(point_at(order[0])))]

    iterations = 0
    converged = False

    for index in order[:OPTIMIZER_CONFIG["refine_starts"]]:
        try:
            result = minimize(
                objective,
                point_at(index),
                method="Nelder-Mead",
                options={
                    "xatol": OPTIMIZER_CONFIG["angle_tol"],
                    "fatol": OPTIMIZER_CONFIG["value_tol"],
                    "maxiter": 4000,
                },
            )
        except (ValueError, FloatingPointError) as e:
            logger.warning(f"Nelder-Mead refinement failed: {e}")
            continue

        iterations += int(result.nit)
        converged = converged or bool(result.success)
        candidates.append((float(result.fun), canonical(result.x)))

    if not converged:
        logger.warning("measurement refinement did not converge; returning grid optimum")
        value, angles = candidates[0]
        return value, angles, iterations, "grid", False

    value, angles = _pick_best(candidates)
    return value, angles, iterations, "grid+nelder-mead", True


def _one_sided_canonical(point) -> Tuple[float, float]:
    basis = MeasurementBasis.from_angles(point[0], point[1])
    return basis.theta, basis.phi


def minimize_conditioned_entropy(state: TwoSiteState) -> Tuple[float, MeasurementBasis, int, str, bool]:
    """Minimum of sum_k p_k S(rho_k) over projective measurements on B"""
    thetas, phis = measurement_grid(OPTIMIZER_CONFIG["grid_step"])
    grid = conditioned_entropy_grid(state, thetas, phis)

    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    points = np.column_stack([tt.ravel(), pp.ravel()])

    def objective(x):
        vectors = basis_vectors(np.array([x[0]]), np.array([x[1]]))
        return float(_weighted_entropies(_conditional_states(state.matrix, vectors))[0])

    value, angles, iterations, method, converged = _refine(
        objective, grid.ravel(), lambda i: points[i], _one_sided_canonical
    )
    return value, MeasurementBasis(*angles), iterations, method, converged


def classical_correlation(state: TwoSiteState) -> Tuple[float, MeasurementResult]:
    """C = max over B-measurements of S(rho_A) - sum_k p_k S(rho_k)"""
    entropy_a = von_neumann_entropy(state.marginal(0))
    conditioned, basis, iterations, method, converged = minimize_conditioned_entropy(state)

    value = entropy_a - conditioned
    value = min(max(value, 0.0), mutual_information(state))

    result = MeasurementResult(
        value=value,
        bases=(basis,),
        iterations=iterations,
        method=method,
        converged=converged,
        upper_bound=not is_x_state(state),
    )
    return value, result


def quantum_discord(state: TwoSiteState) -> Tuple[float, MeasurementResult]:
    """Q = I - C; tagged as an upper bound for states outside the X family"""
    information = mutual_information(state)
    classical, result = classical_correlation(state)
    return information - classical, result


def discord_closed_form_xy(c: CorrelatorSet) -> float:
    """Discord of a Z2-symmetric X state from its correlators, measuring along x"""
    if not c.symmetric:
        raise SymmetryError("closed-form XY discord needs g_x = g_xz = 0")

    gz, gxx, gyy, gzz = c.g_z, c.g_xx, c.g_yy, c.g_zz

    # Outer (|00>,|11>) and inner (|01>,|10>) blocks of the X state
    a, d, f = 1 + 2 * gz + gzz, 1 - 2 * gz + gzz, gxx - gyy
    root = np.sqrt((a - d) ** 2 + 4 * f ** 2)
    xi = np.array([(a + d + root) / 8, (a + d - root) / 8])
    eta = np.array([(1 - gzz + gxx + gyy) / 4, (1 - gzz - gxx - gyy) / 4])

    for value in np.concatenate([xi, eta]):
        if value < -ENGINE_CONFIG["psd_tol"]:
            raise DensityMatrixError(f"correlators give a negative eigenvalue {value:.3e}")

    p1 = (1 + gz) / 2
    p2 = (1 + np.sqrt(gxx ** 2 + gz ** 2)) / 2

    information = 2 * float(binary_entropy(p1)) - entropy_from_eigenvalues(np.concatenate([xi, eta]))
    classical = float(binary_entropy(p1)) - float(binary_entropy(p2))

    return max(0.0, information - classical)


def bell_diagonal_eigenvalues(c1: float, c2: float, c3: float) -> np.ndarray:
    return np.array([
        (1 - c1 - c2 - c3) / 4,
        (1 - c1 + c2 + c3) / 4,
        (1 + c1 - c2 + c3) / 4,
        (1 + c1 + c2 - c3) / 4,
    ])


def _checked_bell_diagonal(c1: float, c2: float, c3: float) -> np.ndarray:
    eigenvalues = bell_diagonal_eigenvalues(c1, c2, c3)
    if eigenvalues.min() < -ENGINE_CONFIG["psd_tol"]:
        raise DensityMatrixError(f"Bell-diagonal parameters ({c1}, {c2}, {c3}) are not a valid state")
    return np.clip(eigenvalues, 0.0, None)


def classical_correlation_bell_diagonal(c1: float, c2: float, c3: float) -> float:
    _checked_bell_diagonal(c1, c2, c3)
    c = min(1.0, max(abs(c1), abs(c2), abs(c3)))
    return float(1.0 - binary_entropy((1 + c) / 2))


def mutual_information_bell_diagonal(c1: float, c2: float, c3: float) -> float:
    eigenvalues = _checked_bell_diagonal(c1, c2, c3)
    return 2.0 - entropy_from_eigenvalues(eigenvalues)


def discord_bell_diagonal(c1: float, c2: float, c3: float) -> float:
    information = mutual_information_bell_diagonal(c1, c2, c3)
    return max(0.0, information - classical_correlation_bell_diagonal(c1, c2, c3))


def xxz_correlators_from_energy(eps: float, deps_ddelta: float, delta: float) -> Tuple[float, float, float]:
    """Bell-diagonal (c1, c2, c3) of the XXZ nearest-neighbour pair from the energy density"""
    c1 = delta * deps_ddelta - eps
    c3 = -2.0 * deps_ddelta
    return c1, c1, c3


def concurrence(state: TwoSiteState) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4)"""
    rho = state.matrix
    tilde = SPIN_FLIP @ rho.conj() @ SPIN_FLIP

    root = _psd_sqrt(rho)
    singular = svdvals(root @ _psd_sqrt(tilde))

    return float(max(0.0, singular[0] - singular[1] - singular[2] - singular[3]))


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    return (eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ eigenvectors.conj().T


def entanglement_of_formation(state: TwoSiteState) -> float:
    value = min(concurrence(state), 1.0)
    return float(binary_entropy((1 + np.sqrt(1 - value ** 2)) / 2))


def _joint_outcomes(rho: np.ndarray, vectors_a: np.ndarray, vectors_b: np.ndarray) -> np.ndarray:
    """p[n, m, k, l] = <a_k b_l| rho |a_k b_l> for basis n on A and basis m on B"""
    tensor = rho.reshape(2, 2, 2, 2)
    half = np.einsum("nka,ajcq,nkc->nkjq", vectors_a.conj(), tensor, vectors_a)
    return np.real(np.einsum("nkjq,mlj,mlq->nmkl", half, vectors_b.conj(), vectors_b))


def _shannon(q: np.ndarray, axes) -> np.ndarray:
    q = np.clip(q, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, -q * np.log2(q), 0.0)
    return terms.sum(axis=axes)


def _classical_information(p: np.ndarray) -> np.ndarray:
    """Shannon mutual information of the joint outcome distributions on the last two axes"""
    return _shannon(p.sum(axis=-1), -1) + _shannon(p.sum(axis=-2), -1) - _shannon(p, (-2, -1))


def _symmetric_canonical(point) -> Tuple[float, float, float, float]:
    a = MeasurementBasis.from_angles(point[0], point[1])
    b = MeasurementBasis.from_angles(point[2], point[3])
    return a.theta, a.phi, b.theta, b.phi


def symmetric_discord(state: TwoSiteState) -> Tuple[float, MeasurementResult]:
    """I(rho) minus the largest classical mutual information reachable by local measurements on both parties"""
    thetas, phis = measurement_grid(OPTIMIZER_CONFIG["symmetric_grid_step"])
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vectors = basis_vectors(tt.ravel(), pp.ravel())

    # Negated so the shared refinement minimizes
    grid = -_classical_information(_joint_outcomes(state.matrix, vectors, vectors))

    side = np.column_stack([tt.ravel(), pp.ravel()])
    n = side.shape[0]

    def point_at(index):
        i, j = divmod(int(index), n)
        return np.concatenate([side[i], side[j]])

    def objective(x):
        va = basis_vectors(np.array([x[0]]), np.array([x[1]]))
        vb = basis_vectors(np.array([x[2]]), np.array([x[3]]))
        return float(-_classical_information(_joint_outcomes(state.matrix, va, vb))[0, 0])

    value, angles, iterations, method, converged = _refine(objective, grid.ravel(), point_at, _symmetric_canonical)

    information = mutual_information(state)
    discord = min(max(information + value, 0.0), information)

    result = MeasurementResult(
        value=discord,
        bases=(MeasurementBasis(angles[0], angles[1]), MeasurementBasis(angles[2], angles[3])),
        iterations=iterations,
        method=method,
        converged=converged,
        upper_bound=not is_x_state(state),
    )
    return discord, result


def _pauli_pair(left: str, right: str) -> np.ndarray:
    return np.kron(PAULI[left], PAULI[right])


def xstate_from_correlators(c: CorrelatorSet) -> TwoSiteState:
    """
    Assemble the pair matrix from per-site magnetizations and two-point correlators.

    The Pauli expansion gives diagonal entries (1 +/- 2 g_z + g_zz)/4 and (1 - g_zz)/4,
    which is the partial-trace normalization.
    """
    matrix = (
        _pauli_pair("i", "i")
        + c.g_z * (_pauli_pair("z", "i") + _pauli_pair("i", "z"))
        + c.g_x * (_pauli_pair("x", "i") + _pauli_pair("i", "x"))
        + c.g_xx * _pauli_pair("x", "x")
        + c.g_yy * _pauli_pair("y", "y")
        + c.g_zz * _pauli_pair("z", "z")
        + c.g_xz * (_pauli_pair("x", "z") + _pauli_pair("z", "x"))
    ) / 4

    return TwoSiteState(matrix, r=c.r, source="correlators")


def correlators_from_pair(state: TwoSiteState) -> CorrelatorSet:
    """Tr(rho O) for the Pauli strings of the pair; single-site values averaged over A and B"""
    def expect(left: str, right: str) -> float:
        return float(np.real(np.trace(state.matrix @ _pauli_pair(left, right))))

    return CorrelatorSet(
        r=state.r,
        g_x=(expect("x", "i") + expect("i", "x")) / 2,
        g_z=(expect("z", "i") + expect("i", "z")) / 2,
        g_xx=expect("x", "x"),
        g_yy=expect("y", "y"),
        g_zz=expect("z", "z"),
        g_xz=(expect("x", "z") + expect("z", "x")) / 2,
    )


def correlation_report(state: TwoSiteState, symmetric: bool = False) -> CorrelationReport:
    """All pairwise measures of a state, with optimizer diagnostics"""
    information = mutual_information(state)
    classical, result = classical_correlation(state)

    report = CorrelationReport(
        mutual_information=information,
        classical_correlation=classical,
        discord=information - classical,
        concurrence=concurrence(state),
        upper_bound=result.upper_bound,
        theta=result.basis.theta,
        phi=result.basis.phi,
        iterations=result.iterations,
        method=result.method,
        converged=result.converged,
    )

    if symmetric:
        report.symmetric_discord, symmetric_result = symmetric_discord(state)
        report.converged = report.converged and symmetric_result.converged

    return report
