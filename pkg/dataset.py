"""
Synthetic two-qubit state families for self-checks and tests
"""
import json
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from correlations import TwoSiteState

BELL_VECTORS = {
    "phi_plus": np.array([1, 0, 0, 1]) / np.sqrt(2),
    "phi_minus": np.array([1, 0, 0, -1]) / np.sqrt(2),
    "psi_plus": np.array([0, 1, 1, 0]) / np.sqrt(2),
    "psi_minus": np.array([0, 1, -1, 0]) / np.sqrt(2),
}

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def _projector(vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=complex)
    return np.outer(vector, vector.conj())


def bell_state(name: str = "psi_minus") -> TwoSiteState:
    """One of the four Bell states (singlet by default)"""
    return TwoSiteState(_projector(BELL_VECTORS[name]), source="bell")


def werner_state(p: float) -> TwoSiteState:
    """p |singlet><singlet| + (1 - p) I/4"""
    matrix = p * _projector(BELL_VECTORS["psi_minus"]) + (1 - p) * np.eye(4) / 4
    return TwoSiteState(matrix, source="werner")


def bell_diagonal_state(c1: float, c2: float, c3: float) -> TwoSiteState:
    """(I + c1 XX + c2 YY + c3 ZZ) / 4"""
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    matrix = (np.eye(4) + c1 * np.kron(x, x) + c2 * np.kron(y, y) + c3 * np.kron(z, z)) / 4
    return TwoSiteState(matrix, source="bell_diagonal")


def qubit_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_state(theta_a: float, phi_a: float, theta_b: float, phi_b: float) -> TwoSiteState:
    vector = np.kron(qubit_vector(theta_a, phi_a), qubit_vector(theta_b, phi_b))
    return TwoSiteState(_projector(vector), source="product")


def ising_limit_mixture() -> TwoSiteState:
    """(|00><00| + |11><11|) / 2, the pair state of the ferromagnetic Ising doublet"""
    return TwoSiteState(np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex), source="ising_limit")


def classical_state(probabilities: List[float]) -> TwoSiteState:
    """Diagonal state in the computational basis"""
    probabilities = np.asarray(probabilities, dtype=float)
    return TwoSiteState(np.diag(probabilities / probabilities.sum()).astype(complex), source="classical")


def quantum_classical_state(p: float, rho0: np.ndarray, rho1: np.ndarray) -> TwoSiteState:
    """p |0><0| (x) rho0 + (1 - p) |1><1| (x) rho1"""
    matrix = p * np.kron(_projector(KET_0), rho0) + (1 - p) * np.kron(_projector(KET_1), rho1)
    return TwoSiteState(matrix, source="quantum_classical")


def zero_plus_mixture() -> TwoSiteState:
    """0.5 |00><00| + 0.5 |++><++|"""
    matrix = 0.5 * _projector(np.kron(KET_0, KET_0)) + 0.5 * _projector(np.kron(KET_PLUS, KET_PLUS))
    return TwoSiteState(matrix, source="zero_plus")


@dataclass
class StateSample:
    """A generated state with its provenance"""
    id: str
    state: TwoSiteState
    family: str
    rank: int


class StateGenerator:
    """Deterministic random two-qubit density matrices"""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.samples: List[StateSample] = []

    def random_state(self, rank: int = 4) -> TwoSiteState:
        """Ginibre-sampled density matrix of the given rank"""
        if not 1 <= rank <= 4:
            raise ValueError(f"rank must lie in [1, 4], got {rank}")

        g = self.rng.standard_normal((4, rank)) + 1j * self.rng.standard_normal((4, rank))
        matrix = g @ g.conj().T
        return TwoSiteState(matrix / np.trace(matrix).real, source="random")

    def random_unitary(self) -> np.ndarray:
        """Haar-random 2x2 unitary via QR of a Ginibre matrix"""
        z = self.rng.standard_normal((2, 2)) + 1j * self.rng.standard_normal((2, 2))
        q, r = np.linalg.qr(z)
        return q * (np.diag(r) / np.abs(np.diag(r)))

    def random_x_state(self) -> TwoSiteState:
        """Random state with only diagonal and anti-diagonal entries"""
        state = self.random_state()
        mask = np.eye(4, dtype=bool) | np.fliplr(np.eye(4, dtype=bool))
        return TwoSiteState(np.where(mask, state.matrix, 0.0), source="random_x")

    def random_states(self, count: int, rank: Optional[int] = None) -> List[StateSample]:
        """`count` states, cycling through ranks 1..4 unless a rank is fixed"""
        samples = []
        for index in range(count):
            state_rank = rank or (index % 4) + 1
            samples.append(StateSample(
                id=f"state_{index:04d}",
                state=self.random_state(state_rank),
                family="random",
                rank=state_rank,
            ))
        self.samples = samples
        return samples

    def named_states(self) -> Dict[str, TwoSiteState]:
        return {
            "bell": bell_state(),
            "werner_0.8": werner_state(0.8),
            "bell_diagonal": bell_diagonal_state(0.3, 0.3, 0.1),
            "ising_limit": ising_limit_mixture(),
            "zero_plus": zero_plus_mixture(),
            "product": product_state(np.pi / 3, 0.4, np.pi / 5, 1.1),
        }

    def export_states(self, filename: str):
        """Export the generated states to JSON (real and imaginary parts)"""
        data = [
            {
                "id": sample.id,
                "family": sample.family,
                "rank": sample.rank,
                "real": sample.state.matrix.real.tolist(),
                "imag": sample.state.matrix.imag.tolist(),
            }
            for sample in self.samples
        ]
        with open(filename, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)

    def load_states(self, filename: str) -> List[StateSample]:
        with open(filename, "r", encoding="utf-8") as f:
            data = json.load(f)

        self.samples = [
            StateSample(
                id=item["id"],
                state=TwoSiteState(np.array(item["real"]) + 1j * np.array(item["imag"]), source=item["family"]),
                family=item["family"],
                rank=item["rank"],
            )
            for item in data
        ]
        return self.samples
