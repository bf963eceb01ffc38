import numpy as np
import pytest
from numpy.testing import assert_allclose

from correlations import TwoSiteState, MeasurementBasis, symmetric_discord
from dataset import (
    StateGenerator, bell_state, product_state, classical_state, zero_plus_mixture, werner_state,
)
from ed_engine import broken_state, central_pair
from model_core import xy_preset, preset_spec
from witness import (
    witness_operator, trace_norm, witness, product_projectors, classicality_commutator_check,
    dephase, marginal_eigenbases, witness_profile, closed_form_witness_states,
)

COMPUTATIONAL = (MeasurementBasis(0.0, 0.0), MeasurementBasis(0.0, 0.0))


class TestTraceNorm:
    def test_pauli_x(self):
        assert trace_norm(np.array([[0, 1], [1, 0]])) == pytest.approx(2.0)

    def test_hermitian_matrix(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        hermitian = a + a.conj().T
        assert trace_norm(hermitian) == pytest.approx(np.abs(np.linalg.eigvalsh(hermitian)).sum(), rel=1e-12)


class TestWitness:
    def test_product_state(self):
        report = witness(product_state(0.4, 1.0, 2.1, 0.3))
        assert report.trace_norm < 1e-12
        assert report.is_candidate_classical

    def test_bell_state_has_maximally_mixed_marginals(self):
        assert witness(bell_state()).trace_norm < 1e-12

    def test_zero_plus_mixture(self):
        report = witness(zero_plus_mixture())
        assert report.trace_norm > 1e-3
        assert not report.is_candidate_classical

    def test_classical_states_have_zero_witness(self):
        state = classical_state([0.1, 0.2, 0.3, 0.4])
        assert witness(state).trace_norm < 1e-12
        assert symmetric_discord(state)[0] < 1e-8

    def test_operator_is_anti_hermitian(self):
        w = witness_operator(StateGenerator(seed=2).random_state())
        assert_allclose(w, -w.conj().T, atol=1e-14)

    def test_invariant_under_local_unitaries(self):
        generator = StateGenerator(seed=9)
        for _ in range(20):
            state = generator.random_state()
            u = np.kron(generator.random_unitary(), generator.random_unitary())
            rotated = TwoSiteState(u @ state.matrix @ u.conj().T)
            assert witness(rotated).trace_norm == pytest.approx(witness(state).trace_norm, abs=1e-12)

    def test_tolerance_is_reported(self):
        report = witness(werner_state(0.2), tolerance=1e-3)
        assert report.tolerance == 1e-3


class TestClassicalityCheck:
    def test_four_product_projectors(self):
        projectors = product_projectors(COMPUTATIONAL)
        assert len(projectors) == 4
        assert_allclose(sum(projectors), np.eye(4), atol=1e-15)

    def test_diagonal_state_commutes_with_computational_basis(self):
        assert classicality_commutator_check(classical_state([0.1, 0.2, 0.3, 0.4]), COMPUTATIONAL)

    def test_bell_state_fails_for_every_scanned_basis(self):
        state = bell_state("phi_plus")
        for theta in np.linspace(0.0, np.pi, 30):
            for phi in np.arange(30) * (2 * np.pi / 30):
                basis = MeasurementBasis(theta, phi)
                assert not classicality_commutator_check(state, (basis, basis))

    def test_product_state_in_its_marginal_bases(self):
        state = product_state(0.9, 0.2, 2.0, 4.0)
        assert classicality_commutator_check(state, marginal_eigenbases(state))

    def test_dephasing_is_idempotent_and_classical(self):
        state = StateGenerator(seed=4).random_state()
        bases = marginal_eigenbases(state)
        once = dephase(state, bases)
        twice = dephase(once, bases)
        assert_allclose(twice.matrix, once.matrix, atol=1e-14)
        assert classicality_commutator_check(once, bases)


class TestProfiles:
    def test_thermal_closed_form_has_no_zero(self):
        fields = np.round(np.arange(0.2, 3.001, 0.1), 12)
        profile = witness_profile("closed_form", fields, closed_form_witness_states(0.6, fields))
        assert profile.zeros == []
        assert np.all(profile.norms > 1e-8)

    def test_kink_at_the_critical_field(self):
        fields = np.round(np.arange(0.5, 1.5001, 0.01), 12)
        profile = witness_profile("closed_form", fields, closed_form_witness_states(1.0, fields))
        assert abs(profile.kink_field - 1.0) <= 0.02

    def test_broken_states_vanish_at_the_factorizing_field(self):
        fields = np.round(np.arange(0.70, 0.9001, 0.01), 12)
        states = [
            central_pair(broken_state(preset_spec(xy_preset(0.6), n_sites=8, h=h, hx=1e-6)).ground(), 1)
            for h in fields
        ]
        profile = witness_profile("broken", fields, states)
        index = int(np.argmin(profile.norms))
        assert fields[index] == pytest.approx(0.8)
        assert profile.norms[index] < 1e-3

        assert classicality_commutator_check(states[index], marginal_eigenbases(states[index]), tolerance=1e-3)

    @pytest.mark.slow
    def test_twelve_site_profile_vanishes_only_at_the_factorizing_field(self):
        fields = np.round(np.arange(0.70, 0.9001, 0.01), 12)
        states = [
            central_pair(broken_state(preset_spec(xy_preset(0.6), n_sites=12, h=h, hx=1e-6)).ground(), 1)
            for h in fields
        ]
        profile = witness_profile("broken", fields, states, tolerance=1e-4)
        assert profile.zeros == [pytest.approx(0.8)]
        assert fields[int(np.argmin(profile.norms))] == pytest.approx(0.8)

    def test_short_profiles_have_no_kink(self):
        fields = [0.5, 0.6, 0.7]
        profile = witness_profile("closed_form", fields, closed_form_witness_states(0.5, fields))
        assert profile.kink_field is None
        assert profile.minimum_field is not None
