import numpy as np
import pytest
from dataclasses import replace
from numpy.testing import assert_allclose

from conftest import kron_hamiltonian, partial_trace_oracle
from correlations import (
    SymmetryError, mutual_information, quantum_discord, concurrence,
    TwoSiteState, correlators_from_pair, xstate_from_correlators,
)
from ed_engine import (
    SizeLimitError, ChainState, GroundStateBundle, build_hamiltonian, ground_state, thermal_state,
    broken_state, doublet_broken_state, reduce_two_site, reduce_one_site, central_pair, correlators,
    parity_sectors, parity_operator,
    pair_sites, energy_density, energy_derivative, product_state, ghz_state, purity,
)
from model_core import ChainSpec, ModelPreset, xy_preset, preset_spec, convert_convention, factorizing_field
from xy_closed_form import XYPoint, xy_finite_correlators


def thermal(spec):
    return thermal_state(ground_state(build_hamiltonian(spec)))


class TestHamiltonian:
    def test_free_spins_in_a_field(self):
        H = build_hamiltonian(ChainSpec(jx=0.0, jy=0.0, jz=0.0, h=1.0, n_sites=2))
        assert_allclose(np.linalg.eigvalsh(H.matrix), [-2.0, 0.0, 0.0, 2.0], atol=1e-14)

    def test_open_ising_pair(self):
        spec = preset_spec(ModelPreset("ising"), n_sites=2, boundary="open")
        assert_allclose(np.linalg.eigvalsh(build_hamiltonian(spec).matrix), [-1.0, -1.0, 1.0, 1.0], atol=1e-14)

    def test_two_site_ring_has_one_bond(self):
        ring = build_hamiltonian(preset_spec(xy_preset(0.4), n_sites=2, h=0.3)).matrix
        chain = build_hamiltonian(preset_spec(xy_preset(0.4), n_sites=2, h=0.3, boundary="open")).matrix
        assert_allclose(ring, chain)

    @pytest.mark.parametrize("boundary", ["periodic", "open"])
    def test_matches_kronecker_construction(self, boundary, rng):
        jx, jy, jz, h = rng.normal(size=4)
        spec = ChainSpec(jx=jx, jy=jy, jz=jz, h=h, n_sites=5, boundary=boundary)
        expected = kron_hamiltonian(jx, jy, jz, h, 5, periodic=boundary == "periodic")
        assert_allclose(build_hamiltonian(spec).matrix, expected, atol=1e-13)

    def test_staggered_pinning(self):
        spec = ChainSpec(jx=1.0, jy=0.25, jz=1.0, h=0.5, hx=0.1, n_sites=4, pinning="staggered")
        expected = kron_hamiltonian(1.0, 0.25, 1.0, 0.5, 4, hx=0.1, staggered=True)
        assert_allclose(build_hamiltonian(spec).matrix, expected, atol=1e-13)

    def test_spin_half_convention_scales_the_pauli_matrix(self):
        pauli = ChainSpec(jx=-0.85, jy=-0.15, jz=0.0, h=0.7, hx=0.01, n_sites=4)
        half = convert_convention(pauli, "spin_half")
        assert_allclose(build_hamiltonian(half).matrix, 4.0 * build_hamiltonian(pauli).matrix, atol=1e-13)

    def test_sparse_and_dense_agree(self):
        spec = preset_spec(xy_preset(0.7), n_sites=6, h=0.9)
        dense = build_hamiltonian(spec, storage="dense")
        sparse = build_hamiltonian(spec, storage="sparse")
        assert sparse.storage == "sparse"
        assert_allclose(sparse.matrix.toarray(), dense.matrix)

    def test_hermitian_and_parity_symmetric(self):
        H = build_hamiltonian(preset_spec(xy_preset(0.3), n_sites=6, h=0.6)).matrix
        P = parity_operator(6).toarray()
        assert np.abs(H - H.conj().T).max() < 1e-14
        assert np.abs(P @ H - H @ P).max() < 1e-12

    def test_size_limit(self):
        with pytest.raises(SizeLimitError):
            build_hamiltonian(preset_spec(ModelPreset("ising"), n_sites=21, h=1.0))

    def test_parity_sectors_partition_the_basis(self):
        even, odd = parity_sectors(4)
        assert len(even) == len(odd) == 8
        assert sorted(np.concatenate([even, odd])) == list(range(16))
        assert 0 in even and 1 in odd and 3 in even


class TestGroundStates:
    def test_gap_matches_full_spectrum(self):
        spec = preset_spec(xy_preset(0.7), n_sites=8, h=0.9)
        bundle = ground_state(build_hamiltonian(spec))
        spectrum = np.linalg.eigvalsh(kron_hamiltonian(spec.jx, spec.jy, spec.jz, spec.h, 8))
        assert_allclose(bundle.energies, spectrum[:2], atol=1e-10)
        assert bundle.gap == pytest.approx(spectrum[1] - spectrum[0], abs=1e-10)
        assert_allclose(np.linalg.norm(bundle.vectors, axis=0), [1.0, 1.0])

    def test_sparse_solver_agrees_with_dense(self):
        spec = preset_spec(xy_preset(0.5), n_sites=8, h=1.2)
        dense = ground_state(build_hamiltonian(spec, storage="dense"))
        sparse = ground_state(build_hamiltonian(spec, storage="sparse"))
        assert_allclose(sparse.energies, dense.energies, atol=1e-10)

    def test_ground_vectors_are_parity_eigenstates(self):
        spec = preset_spec(xy_preset(0.7), n_sites=6, h=0.5)
        bundle = ground_state(build_hamiltonian(spec))
        P = parity_operator(6).toarray()
        for vector in bundle.vectors.T:
            overlap = vector.conj() @ P @ vector
            assert abs(abs(overlap) - 1.0) < 1e-12

    def test_degenerate_doublet_is_mixed(self):
        bundle = ground_state(build_hamiltonian(preset_spec(ModelPreset("ising"), n_sites=2)))
        assert bundle.degenerate
        state = thermal_state(bundle)
        assert_allclose(state.weights, [0.5, 0.5])
        c = correlators(state, 1)
        assert c.g_xx == pytest.approx(1.0, abs=1e-12)
        assert c.g_z == pytest.approx(0.0, abs=1e-12)

    def test_strong_field_polarizes(self):
        state = thermal(preset_spec(ModelPreset("ising"), n_sites=10, h=5.0))
        # second order in 1/h puts the infinite chain at 1 - 4 (1 / 4h)^2 = 0.99
        assert correlators(state, 1).g_z > 0.98

    def test_strong_field_magnetization_matches_kronecker_oracle(self):
        spec = preset_spec(ModelPreset("ising"), n_sites=8, h=5.0)
        _, vectors = np.linalg.eigh(kron_hamiltonian(spec.jx, spec.jy, spec.jz, spec.h, 8))
        psi = vectors[:, 0]
        z0 = np.kron(np.diag([1.0, -1.0]), np.eye(2 ** 7))
        expected = float(np.real(psi.conj() @ z0 @ psi))
        assert correlators(thermal(spec), 1).g_z == pytest.approx(expected, abs=1e-10)

    def test_thermal_state_needs_zero_pinning(self):
        spec = preset_spec(ModelPreset("ising"), n_sites=4, h=0.5, hx=1e-6)
        with pytest.raises(SymmetryError):
            thermal_state(ground_state(build_hamiltonian(spec)))

    def test_broken_state_needs_pinning(self):
        with pytest.raises(SymmetryError):
            broken_state(preset_spec(ModelPreset("ising"), n_sites=4, h=0.5))

    def test_broken_state_has_positive_order_parameter(self):
        spec = preset_spec(ModelPreset("ising"), n_sites=8, h=0.3, hx=1e-3)
        c = correlators(broken_state(spec).ground(), 1)
        assert c.g_x > 0.9

    def test_thermal_state_has_no_order_parameter(self):
        c = correlators(thermal(preset_spec(ModelPreset("ising"), n_sites=8, h=0.3)), 1)
        assert abs(c.g_x) < 1e-12
        assert abs(c.g_xz) < 1e-12

    def test_energy_density(self):
        spec = preset_spec(xy_preset(0.5), n_sites=6, h=0.8)
        spectrum = np.linalg.eigvalsh(kron_hamiltonian(spec.jx, spec.jy, spec.jz, spec.h, 6))
        assert energy_density(spec) == pytest.approx(spectrum[0] / 6, abs=1e-12)

    def test_energy_derivative_is_the_field_magnetization(self):
        spec = preset_spec(xy_preset(0.5), n_sites=8, h=1.4)
        # dE/dh = -sum <Z_j>
        magnetization = correlators(thermal(spec), 1).g_z
        assert energy_derivative(spec, "h") == pytest.approx(-magnetization, abs=1e-6)

    def test_energy_derivative_parameter(self):
        with pytest.raises(ValueError):
            energy_derivative(preset_spec(xy_preset(0.5), n_sites=4), "gamma")


class TestReductions:
    def test_product_state(self):
        pair = reduce_two_site(product_state(4), 1, 2)
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert_allclose(pair.matrix, expected, atol=1e-15)
        assert correlators(product_state(4), 1).g_z == pytest.approx(1.0)

    def test_ghz_state(self):
        pair = reduce_two_site(ghz_state(5), 0, 3)
        assert_allclose(pair.matrix, np.diag([0.5, 0.0, 0.0, 0.5]), atol=1e-15)
        assert pair.r == 3

    def test_matches_explicit_partial_trace(self, rng):
        vector = rng.normal(size=32) + 1j * rng.normal(size=32)
        vector /= np.linalg.norm(vector)
        state = ChainState(vectors=vector[:, None], weights=np.ones(1), n_sites=5)
        for i, j in [(0, 1), (1, 3), (0, 4), (2, 4)]:
            assert_allclose(reduce_two_site(state, i, j).matrix, partial_trace_oracle(vector, (i, j), 5), atol=1e-13)
        assert_allclose(reduce_one_site(state, 2), partial_trace_oracle(vector, (2,), 5), atol=1e-13)

    def test_bit_ordering(self):
        state = product_state(3, [0, 1, 0])
        assert_allclose(reduce_one_site(state, 1), np.diag([0.0, 1.0]))
        assert_allclose(reduce_one_site(state, 0), np.diag([1.0, 0.0]))

    def test_invalid_indices(self):
        with pytest.raises(IndexError):
            reduce_two_site(product_state(4), 2, 2)
        with pytest.raises(IndexError):
            reduce_two_site(product_state(4), 1, 4)

    def test_central_pair(self):
        assert pair_sites(8, 1) == (3, 4)
        assert pair_sites(8, 2) == (2, 4)
        assert pair_sites(12, 5) == (3, 8)
        with pytest.raises(IndexError):
            pair_sites(8, 8)
        with pytest.raises(IndexError):
            pair_sites(8, 0)

    def test_thermal_pair_is_an_x_state_of_its_correlators(self):
        state = thermal(preset_spec(xy_preset(0.7), n_sites=8, h=0.9))
        pair = central_pair(state, 2)
        rebuilt = xstate_from_correlators(correlators_from_pair(pair))
        assert_allclose(pair.matrix, rebuilt.matrix, atol=1e-10)

    def test_pair_states_are_invariant_under_unit_conversion(self):
        spec = preset_spec(xy_preset(0.7), n_sites=6, h=1.3)
        a = central_pair(thermal(spec), 1)
        b = central_pair(thermal(convert_convention(spec, "spin_half")), 1)
        assert_allclose(a.matrix, b.matrix, atol=1e-12)

    def test_purity(self):
        assert purity(reduce_two_site(product_state(3), 0, 1)) == pytest.approx(1.0)
        assert purity(np.eye(4) / 4) == pytest.approx(0.25)


class TestFiniteRingOracle:
    @pytest.mark.parametrize("h", [1.3, 0.8])
    def test_even_sector_matches_free_fermion_correlators(self, h):
        spec = preset_spec(xy_preset(0.7), n_sites=8, h=h)
        H = build_hamiltonian(spec).matrix
        even, _ = parity_sectors(8)
        _, vectors = np.linalg.eigh(H[np.ix_(even, even)])
        vector = np.zeros(256)
        vector[even] = vectors[:, 0]
        state = ChainState(vectors=vector[:, None], weights=np.ones(1), n_sites=8)

        expected = xy_finite_correlators(XYPoint(0.7, h), n_sites=8, r_max=3)
        for r in (1, 2, 3):
            c = correlators(state, r)
            e = expected.at(r)
            assert_allclose([c.g_z, c.g_xx, c.g_yy, c.g_zz], [e.g_z, e.g_xx, e.g_yy, e.g_zz], atol=1e-10)


class TestPinningAverage:
    @pytest.mark.parametrize("h", [0.0, 0.5])
    def test_thermal_pair_is_the_average_of_opposite_pinnings(self, h):
        spec = preset_spec(ModelPreset("ising"), n_sites=8, h=h)
        thermal_pair = central_pair(thermal(spec), 1)

        pinned = build_hamiltonian(replace(spec, hx=1e-6), storage="dense").matrix
        P = parity_operator(8).toarray()
        pairs = []
        # Pi X Pi = -X, so Pi H(hx) Pi is the chain pinned by -hx
        for matrix in (pinned, P @ pinned @ P):
            _, vectors = np.linalg.eigh(matrix)
            state = ChainState(vectors=vectors[:, :1], weights=np.ones(1), n_sites=8)
            pairs.append(central_pair(state, 1).matrix)

        assert_allclose((pairs[0] + pairs[1]) / 2, thermal_pair.matrix, atol=1e-4)
        assert correlators_from_pair(TwoSiteState(pairs[0])).g_x > 0


class TestFactorization:
    def test_broken_state_factorizes(self):
        spec = preset_spec(xy_preset(0.7), n_sites=8, hx=1e-6)
        spec = replace(spec, h=factorizing_field(spec))
        state = broken_state(spec).ground()
        for r in (1, 2, 3):
            pair = central_pair(state, r)
            assert purity(pair) > 1 - 1e-4
            assert quantum_discord(pair)[0] < 1e-4
            c = correlators_from_pair(pair)
            assert c.g_x > 0
            assert c.g_xx == pytest.approx(c.g_x ** 2, abs=1e-4)

    @pytest.mark.slow
    def test_broken_state_factorizes_at_twelve_sites(self):
        spec = preset_spec(xy_preset(0.7), n_sites=12, hx=1e-6)
        spec = replace(spec, h=factorizing_field(spec))
        state = broken_state(spec).ground()
        for r in (1, 2, 3):
            pair = central_pair(state, r)
            assert quantum_discord(pair)[0] < 1e-6
            assert concurrence(pair) < 1e-6
            assert purity(pair) > 1 - 1e-5
            assert mutual_information(pair) < 1e-5

    def test_doublet_state_factorizes(self):
        spec = preset_spec(xy_preset(0.7), n_sites=8)
        spec = replace(spec, h=factorizing_field(spec))
        state = doublet_broken_state(ground_state(build_hamiltonian(spec)))
        assert state.source == "doublet"
        for r in (1, 2, 3):
            pair = central_pair(state, r)
            assert quantum_discord(pair)[0] < 1e-4
            assert correlators_from_pair(pair).g_x > 0

    def test_doublet_state_is_polarized_away_from_the_factorizing_field(self):
        spec = preset_spec(xy_preset(0.7), n_sites=8, h=0.5)
        bundle = ground_state(build_hamiltonian(spec))
        doublet = correlators(doublet_broken_state(bundle), 1)
        assert doublet.g_x > 0.5
        assert correlators(thermal_state(bundle), 1).g_x == pytest.approx(0.0, abs=1e-12)

    def test_doublet_state_needs_zero_pinning(self):
        spec = preset_spec(xy_preset(0.7), n_sites=4, h=0.5, hx=1e-6)
        with pytest.raises(SymmetryError):
            doublet_broken_state(broken_state(spec))

    def test_doublet_state_needs_opposite_parities(self):
        spec = preset_spec(ModelPreset("ising"), n_sites=2)
        vectors = np.zeros((4, 2))
        vectors[0, 0] = vectors[3, 1] = 1.0
        bundle = GroundStateBundle(energies=np.array([-1.0, -1.0]), vectors=vectors, gap=0.0,
                                   degenerate=True, spec=spec)
        with pytest.raises(SymmetryError):
            doublet_broken_state(bundle)

    def test_factorized_energy(self):
        spec = preset_spec(xy_preset(0.6), n_sites=8)
        spec = replace(spec, h=factorizing_field(spec))
        # Product-state energy per site at the factorizing field: -(1 + gamma)/2 sin^2 - h cos
        cos = spec.h / 1.6
        expected = -0.8 * (1 - cos ** 2) - spec.h * cos
        assert energy_density(spec) == pytest.approx(expected, abs=1e-10)
