"""
Shared fixtures and independent oracles for the test suite
"""
from functools import reduce

import numpy as np
import pytest

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def site_operator(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """op acting on `site` (site 0 is the leftmost Kronecker factor)"""
    return reduce(np.kron, [op if j == site else I2 for j in range(n_sites)])


def kron_hamiltonian(jx, jy, jz, h, n_sites, hx=0.0, periodic=True, staggered=False):
    """Dense Pauli-convention chain Hamiltonian built from explicit Kronecker products"""
    dim = 2 ** n_sites
    H = np.zeros((dim, dim), dtype=complex)

    bonds = [(j, j + 1) for j in range(n_sites - 1)]
    if periodic and n_sites > 2:
        bonds.append((n_sites - 1, 0))

    for i, j in bonds:
        for coupling, op in ((jx, X), (jy, Y), (jz, Z)):
            H += coupling * site_operator(op, i, n_sites) @ site_operator(op, j, n_sites)

    for j in range(n_sites):
        H -= h * site_operator(Z, j, n_sites)
        sign = (-1) ** j if staggered else 1
        H -= hx * sign * site_operator(X, j, n_sites)

    return H


def partial_trace_oracle(vector: np.ndarray, keep, n_sites: int) -> np.ndarray:
    """Reduced matrix of a pure state by summing over every basis state of the traced sites"""
    keep = list(keep)
    rest = [s for s in range(n_sites) if s not in keep]
    psi = vector.reshape([2] * n_sites)
    dim = 2 ** len(keep)
    rho = np.zeros((dim, dim), dtype=complex)

    for a in range(dim):
        for b in range(dim):
            bits_a = [(a >> (len(keep) - 1 - k)) & 1 for k in range(len(keep))]
            bits_b = [(b >> (len(keep) - 1 - k)) & 1 for k in range(len(keep))]
            total = 0.0
            for env in range(2 ** len(rest)):
                bits_env = [(env >> (len(rest) - 1 - k)) & 1 for k in range(len(rest))]
                index_a = [0] * n_sites
                index_b = [0] * n_sites
                for site, bit in zip(keep, bits_a):
                    index_a[site] = bit
                for site, bit in zip(keep, bits_b):
                    index_b[site] = bit
                for site, bit in zip(rest, bits_env):
                    index_a[site] = bit
                    index_b[site] = bit
                total += psi[tuple(index_a)] * np.conj(psi[tuple(index_b)])
            rho[a, b] = total
    return rho


def conditioned_entropy_oracle(rho: np.ndarray, theta: float, phi: float) -> float:
    """sum_k p_k S(rho_k) with explicit projectors I (x) |b_k><b_k| on the second qubit"""
    b0 = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    b1 = np.array([np.sin(theta / 2), -np.exp(1j * phi) * np.cos(theta / 2)])

    total = 0.0
    for b in (b0, b1):
        projector = np.kron(I2, np.outer(b, b.conj()))
        block = projector @ rho @ projector
        p = np.real(np.trace(block))
        if p < 1e-14:
            continue
        reduced = np.einsum("ijkj->ik", (block / p).reshape(2, 2, 2, 2))
        eigenvalues = np.linalg.eigvalsh(reduced)
        eigenvalues = eigenvalues[eigenvalues > 1e-15]
        total += p * float(-np.sum(eigenvalues * np.log2(eigenvalues)))
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
