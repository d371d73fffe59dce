import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ordlab.errors import (BandLimitViolated, DimensionBudgetExceeded, DimensionMismatch,
                           IncommensurateWavevector, NonPositiveDenominator)
from ordlab.potentials import GaussianCore, NullPotential, SubstrateCoupled
from ordlab.quantum import (CANDIDATE_KINETIC_COEFFS, apply_c, band_basis, band_double_commutator, band_residual,
                            bogoliubov_slack, build_space, c_operator, comm, commutator_residuals,
                            denominator_curve, double_comm, fundamental_operators, hamiltonian,
                            hermitian_defect, kinetic_double_audit, kinetic_matrix, phase_diagonal,
                            theorem_operators, thermal_average, thermal_state)

TWO_PI = 2 * np.pi


def substrate_on(space, g=0.5, sigma=1.5, order=1):
    G = [TWO_PI * order / space.L] + [0.0] * (space.d - 1)
    return SubstrateCoupled(1.0, sigma, g, tuple(G), sigma)


@pytest.fixture(scope="module")
def ring():
    return build_space(1, 16, TWO_PI, 2)


def test_dimensions():
    assert build_space(1, 16, 1.0, 2).dim == 256
    assert build_space(2, 8, 1.0, 1).dim == 64
    with pytest.raises(DimensionBudgetExceeded):
        build_space(1, 64, 1.0, 3)


def test_momentum_eigenvalues():
    L = 3.7
    space = build_space(1, 16, L, 1, hbar=1.3)
    ev = np.sort(np.linalg.eigvalsh(space.p1))
    np.testing.assert_allclose(ev, 1.3 * TWO_PI / L * np.arange(-8, 8), atol=1e-12)


def test_uniform_state_phase_average():
    space = build_space(1, 16, 5.0, 1)
    uniform = np.ones(space.dim) / np.sqrt(space.dim)
    for m in (1, 3, 8):
        k = space.wavevector(m)
        assert abs(uniform @ (phase_diagonal(space, k) * uniform)) < 1e-14


def test_momentum_phase_commutator_on_band():
    space = build_space(1, 16, 4.0, 1, hbar=0.7)
    k = space.wavevector(2)
    ops = fundamental_operators(space, [k])
    E = np.diag(ops["phase"][tuple(k)][0])
    P = ops["p"][0][0]
    Q = band_basis(space)
    assert band_residual(Q, comm(P, E) - 0.7 * k[0] * E) < 1e-12


def test_theorem_operator_properties(ring):
    phi = GaussianCore(1.0, 1.5)
    k, K = ring.wavevector(1), ring.wavevector(0)
    ops = theorem_operators(ring, phi, k, K)
    uniform = np.ones(ring.dim) / np.sqrt(ring.dim)
    assert abs(uniform @ ops.A @ uniform) < 1e-13
    assert hermitian_defect(ops.C) < 1e-12
    assert hermitian_defect(ops.H) < 1e-12
    np.testing.assert_allclose(ops.A.conj().T, np.diag(phase_diagonal(ring, -(k + K))), atol=1e-14)


def test_matrix_free_operators_match_dense(ring):
    k = ring.wavevector(2)
    X = np.random.default_rng(0).standard_normal((ring.dim, 3))
    np.testing.assert_allclose(apply_c(ring, k, X), c_operator(ring, k) @ X, atol=1e-11)
    np.testing.assert_allclose(ring.apply_kinetic(X), kinetic_matrix(ring) @ X, atol=1e-10)


def test_free_spectrum_is_sum_of_single_particle_levels():
    space = build_space(1, 8, 3.0, 2)
    ev = np.linalg.eigvalsh(hamiltonian(space, NullPotential()))
    single = (TWO_PI / 3.0 * np.arange(-4, 4)) ** 2 / 2
    expected = np.sort((single[:, None] + single[None, :]).ravel())
    np.testing.assert_allclose(ev, expected, atol=1e-10)


def test_thermal_average_limits(ring):
    H = hamiltonian(ring, GaussianCore(1.0, 1.5))
    st_ = thermal_state(H, 1.0)
    assert thermal_average(st_, np.eye(ring.dim)) == pytest.approx(1.0, abs=1e-13)
    E = np.linalg.eigvalsh(H)
    cold = thermal_state(H, 1e3 / (E[1] - E[0]))
    assert thermal_average(cold, H).real == pytest.approx(E[0], abs=1e-9)
    with pytest.raises(DimensionMismatch):
        thermal_average(st_, np.eye(3))


def test_total_momentum_vanishes(ring):
    st_ = thermal_state(hamiltonian(ring, GaussianCore(1.0, 1.5)), 1.0)
    P = ring.p(0, 0) + ring.p(1, 0)
    assert abs(thermal_average(st_, P)) < 1e-10


def test_free_particle_slack_nonnegative():
    space = build_space(1, 16, TWO_PI, 1)
    r = bogoliubov_slack(space, None, space.wavevector(1), space.wavevector(3), 1.0)
    assert r.slack >= 0 and r.holds()


def test_symmetric_case_has_zero_rhs(ring):
    r = bogoliubov_slack(ring, NullPotential(), ring.wavevector(1), ring.wavevector(2), 1.0)
    assert r.rhs < 1e-25 and r.rhs <= r.lhs


def test_vanishing_c_is_rejected():
    space = build_space(1, 8, 2.0, 1)
    with pytest.raises(NonPositiveDenominator):
        bogoliubov_slack(space, None, space.wavevector(8), space.wavevector(0), 1.0)


@settings(max_examples=12)
@given(st.integers(0, 2**31 - 1))
def test_inequality_holds_on_random_draws(seed):
    from ordlab.cli import _random_quantum_draw

    space, phi, k, K, beta = _random_quantum_draw(np.random.default_rng(seed))
    r = bogoliubov_slack(space, phi, k, K, beta)
    assert r.slack >= -1e-9 * abs(r.lhs)


def test_wavevector_validation(ring):
    with pytest.raises(IncommensurateWavevector):
        theorem_operators(ring, None, np.array([0.5]), np.array([0.0]))
    with pytest.raises(DimensionMismatch):
        ring.vector([1.0, 2.0])
    with pytest.raises(BandLimitViolated):
        commutator_residuals(ring, None, ring.wavevector(2), ring.wavevector(3), 1.0)


@pytest.fixture(scope="module")
def gaussian_report(ring):
    return commutator_residuals(ring, GaussianCore(1.0, 1.5), ring.wavevector(1), ring.wavevector(2), 1.0)


@pytest.fixture(scope="module")
def substrate_report(ring):
    return commutator_residuals(ring, substrate_on(ring), ring.wavevector(1), ring.wavevector(2), 1.0)


@pytest.mark.parametrize("key", ["density_pair", "commutator_operator", "commutator_average",
                                 "potential_double", "local_reduction"])
def test_local_identities(gaussian_report, key):
    assert gaussian_report.residuals[key] < 1e-9


@pytest.mark.parametrize("key", ["density_pair", "commutator_operator", "commutator_average", "potential_double"])
def test_nonlocal_identities(substrate_report, key):
    assert substrate_report.residuals[key] < 1e-9


def test_local_reduction_fails_for_nonlocal(substrate_report):
    assert substrate_report.residuals["local_reduction"] > 1e-3
    assert not substrate_report.local_reduction_applicable
    assert substrate_report.passed()


def test_one_dimensional_readings_coincide(gaussian_report):
    r = gaussian_report
    assert r.residuals["potential_double_projected"] < 1e-9
    assert r.commutator_closed_form_residual < 1e-9


def test_commutator_with_zero_K_uses_particle_number(ring):
    rep = commutator_residuals(ring, GaussianCore(1.0, 1.5), ring.wavevector(1), ring.wavevector(0), 1.0)
    assert rep.residuals["commutator_average"] < 1e-9
    assert rep.residuals["commutator_operator"] < 1e-9


def test_kinetic_audit_reading(gaussian_report):
    a = gaussian_report.kinetic_audit
    assert not a.candidate_matches
    assert a.candidate_residual == pytest.approx(0.25, rel=1e-9)
    assert a.fit_residual < 1e-12
    expected = {"kp2": 1.0, "pcp": 1.0, "sin2": -0.75, "const": 0.5}
    for name, value in expected.items():
        assert a.fitted[name] == pytest.approx(value, abs=1e-10)
    # a translation-invariant state averages cos(2kx) to zero, hiding the mismatch
    assert a.candidate_thermal_gap < 1e-9
    assert set(CANDIDATE_KINETIC_COEFFS) >= set(a.fitted)


def test_kinetic_audit_independent_of_hbar():
    space = build_space(1, 16, TWO_PI, 2, hbar=2.0)
    a = kinetic_double_audit(space, space.wavevector(1))
    assert a.fitted["sin2"] == pytest.approx(-0.75, abs=1e-10)
    assert a.fitted["const"] == pytest.approx(0.5, abs=1e-10)


def test_candidate_kinetic_form_visible_for_nonlocal(substrate_report):
    assert substrate_report.kinetic_audit.candidate_thermal_gap > 1e-3


def test_band_double_commutator_matches_dense(ring):
    k = ring.wavevector(1)
    C = c_operator(ring, k)
    U = np.diag(np.random.default_rng(1).standard_normal(ring.dim))
    Q = band_basis(ring)
    dense = Q.conj().T @ double_comm(C, U) @ Q
    fast = band_double_commutator(Q, lambda X: apply_c(ring, k, X), lambda X: U @ X)
    np.testing.assert_allclose(fast, dense, atol=1e-10)


def test_denominator_curve_matches_dense(ring):
    phi = GaussianCore(1.0, 1.5)
    H = hamiltonian(ring, phi)
    st_ = thermal_state(H, 0.8)
    ks = [ring.wavevector(j) for j in (1, 2, 3)]
    fast = denominator_curve(ring, phi, ks, 0.8)
    dense = [thermal_average(st_, double_comm(c_operator(ring, k), H)).real for k in ks]
    np.testing.assert_allclose(fast, dense, rtol=1e-10)


def test_grid_refinement_until_roundoff():
    res = {}
    for M in (8, 16, 32):
        space = build_space(1, M, TWO_PI, 2)
        for name, phi in (("gauss", GaussianCore(1.0, 1.5)), ("substrate", substrate_on(space))):
            rep = commutator_residuals(space, phi, space.wavevector(1), space.wavevector(0), 1.0)
            res[name, M] = rep.residuals["potential_double"]
    for name in ("gauss", "substrate"):
        assert res[name, 8] > res[name, 16]
        # by M = 32 the residual sits at the double-precision floor
        assert res[name, 32] < 1e-12


def test_two_dimensional_commutator_identities():
    space = build_space(2, 8, TWO_PI, 2)
    rep = commutator_residuals(space, GaussianCore(1.0, 1.5), space.wavevector(1, 0), space.wavevector(0, 0), 1.0)
    for key in ("density_pair", "commutator_operator", "commutator_average"):
        assert rep.residuals[key] < 1e-9
