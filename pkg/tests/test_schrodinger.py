import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ordlab.errors import GridMismatch, NonHermitianKernel
from ordlab.potentials import GaussianCore, HarmonicPair, NullPotential
from ordlab.schrodinger import (DeltaLocal, RelativeGrid, Separable, apply_nonlocal_phi, build_relative_hamiltonian,
                                harmonic_levels, kinetic_relative, local_reduction_check,
                                separable_bound_state_oracle, solve_spectrum)

# bound-state energies on the M = 256, L = 30 grid (m = hbar = 1, sigma_g = 1),
# from an independent 40-digit root of the grid transcendental equation
FROZEN_BOUND = {-1.0: -1.424746162399157042, -0.3: -0.30778697573078334949}

GRID = RelativeGrid(256, 30.0)


def test_free_spectrum():
    grid = RelativeGrid(32, 8.0)
    H = build_relative_hamiltonian(np.zeros((32, 32)), grid, mass=1.3, hbar=0.9)
    ev = solve_spectrum(H).energies
    p = 2 * np.pi * np.fft.fftfreq(32, d=8.0 / 32)
    np.testing.assert_allclose(ev, np.sort(0.81 * p**2 / (2 * 0.65)), atol=1e-10)
    # +-n pairs are degenerate
    np.testing.assert_allclose(ev[1:-1:2], ev[2::2], atol=1e-10)


def test_harmonic_levels():
    H = build_relative_hamiltonian(DeltaLocal(HarmonicPair(1.0)), GRID)
    spec = solve_spectrum(H, 8, GRID)
    np.testing.assert_allclose(spec.energies, harmonic_levels(1.0, 1.0, 8), rtol=1e-6)
    assert list(spec.parity) == [1, -1] * 4


@pytest.mark.parametrize("lam", sorted(FROZEN_BOUND))
def test_separable_bound_state(lam):
    kernel = Separable(lam, 1.0)
    spec = solve_spectrum(build_relative_hamiltonian(kernel, GRID), 5, GRID)
    assert np.count_nonzero(spec.energies < 0) == 1
    assert spec.energies[0] == pytest.approx(FROZEN_BOUND[lam], abs=1e-8)
    assert separable_bound_state_oracle(kernel, GRID) == pytest.approx(FROZEN_BOUND[lam], abs=1e-10)
    assert spec.parity[0] == 1


def test_repulsive_separable_has_no_bound_state():
    spec = solve_spectrum(build_relative_hamiltonian(Separable(0.5, 1.0), GRID), 5, GRID)
    assert np.all(spec.energies >= -1e-12)
    assert separable_bound_state_oracle(Separable(0.5, 1.0), GRID) is None


@settings(max_examples=15)
@given(st.floats(-3.0, 3.0), st.floats(0.4, 2.0))
def test_separable_count_follows_sign(lam, sg):
    grid = RelativeGrid(64, 20.0)
    ev = solve_spectrum(build_relative_hamiltonian(Separable(lam, sg), grid)).energies
    assert np.all(np.isfinite(ev))
    assert np.count_nonzero(ev < -1e-12) == (1 if lam < -1e-9 else 0)


def test_constant_hamiltonian():
    ev = solve_spectrum(2.5 * np.eye(12)).energies
    np.testing.assert_allclose(ev, 2.5, atol=1e-14)


def test_eigenvector_residuals():
    H = build_relative_hamiltonian(Separable(-1.0, 1.0), GRID) + build_relative_hamiltonian(
        DeltaLocal(GaussianCore(0.5, 0.7)), GRID) - kinetic_relative(GRID)
    spec = solve_spectrum(H, 10, GRID)
    for E, v in zip(spec.energies, spec.vectors.T):
        assert np.linalg.norm(H @ v - E * v) < 1e-10 * max(abs(E), 1.0)


@settings(max_examples=10)
@given(st.floats(-2.0, 2.0), st.floats(0.1, 3.0))
def test_parity_of_nondegenerate_states(lam, eps0):
    grid = RelativeGrid(64, 16.0)
    H = build_relative_hamiltonian(DeltaLocal(GaussianCore(eps0, 1.0)), grid) \
        + build_relative_hamiltonian(Separable(lam, 0.8), grid) - kinetic_relative(grid)
    spec = solve_spectrum(H, 12, grid)
    gaps = np.diff(spec.energies)
    nondeg = [i for i in range(len(gaps) - 1) if gaps[i] > 1e-6 and (i == 0 or gaps[i - 1] > 1e-6)]
    for i in nondeg:
        assert spec.parity[i] != 0


def test_delta_local_pointwise_action():
    grid = RelativeGrid(24, 12.0)
    phi = GaussianCore(1.0, 1.0)
    psi = np.random.default_rng(0).standard_normal((24, 24))
    out = apply_nonlocal_phi(DeltaLocal(phi), psi, grid)
    u = grid.wrap(grid.u[:, None] - grid.u[None, :])
    np.testing.assert_allclose(out, 0.5 * np.exp(-u**2) * psi, atol=1e-14)
    assert not np.any(apply_nonlocal_phi(DeltaLocal(phi), np.zeros((24, 24)), grid))


def test_separable_action_against_quadrature():
    grid = RelativeGrid(64, 20.0)
    kernel = Separable(-0.8, 1.0)
    psi_f = lambda x, y: np.exp(-(x**2 + 0.5 * y**2) / 2)
    x = grid.u
    out = apply_nonlocal_phi(kernel, psi_f(x[:, None], x[None, :]), grid)
    rng = np.random.default_rng(4)
    for a, b in rng.integers(20, 44, size=(10, 2)):
        r1, r2 = x[a], x[b]
        f = lambda r3: kernel.lam * kernel.g(r1 - r2) * kernel.g(2 * r3 - r1 - r2) * psi_f(r3, r1 + r2 - r3)
        ref = integrate.quad(f, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
        assert out[a, b] == pytest.approx(ref, abs=1e-8)


def test_local_reduction():
    assert local_reduction_check(GaussianCore(1.0, 1.0), GRID) < 1e-10
    assert local_reduction_check(NullPotential(), GRID) == 0.0
    assert local_reduction_check(HarmonicPair(1.0), GRID) < 1e-10
    direct = kinetic_relative(GRID) + np.diag(HarmonicPair(1.0).value(GRID.u[:, None], np.zeros((256, 1))))
    np.testing.assert_allclose(solve_spectrum(direct, 6).energies, harmonic_levels(1.0, 1.0, 6), rtol=1e-6)


def test_kernel_validation():
    grid = RelativeGrid(16, 4.0)
    with pytest.raises(GridMismatch):
        build_relative_hamiltonian(np.zeros((8, 8)), grid)
    with pytest.raises(GridMismatch):
        apply_nonlocal_phi(Separable(1.0, 1.0), np.zeros((8, 8)), grid)
    W = np.zeros((16, 16))
    W[0, 1] = 1.0
    with pytest.raises(NonHermitianKernel):
        build_relative_hamiltonian(W, grid)
    W = np.zeros((16, 16))
    W[3, 3] = 1.0  # Hermitian but breaks u -> -u
    with pytest.raises(NonHermitianKernel):
        build_relative_hamiltonian(W, grid)


def test_grid_validation():
    with pytest.raises(ValueError):
        RelativeGrid(15, 1.0)
    with pytest.raises(ValueError):
        Separable(1.0, 0.0)
