"""Two-particle Schrodinger problem with local and nonlocal kernels.

The centre of mass is separated analytically; the solver works in the
relative coordinate u = r1 - r2 on a ring with reduced mass m/2.

Conventions. A kernel <u|V|u'> acts through the delta(r1 + r2 - r3 - r4)
factor, which contributes a Jacobian 1/2 in one dimension. The per-ordering
operator on the grid is therefore W[u, u'] = 1/2 h <u|V|u'> (h is the
trapezoid weight). Summing the two particle orderings gives W + P W P, with
P the reflection u -> -u; for the local kernel this reproduces the pair
energy phi(|u|) of U = 1/2 sum_{i != j} phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .errors import GridMismatch, NonHermitianKernel
from .potentials import PairPotential


@dataclass(frozen=True)
class RelativeGrid:
    M: int
    L: float

    def __post_init__(self):
        if self.M < 2 or self.M % 2:
            raise ValueError("M must be even and >= 2")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def u(self) -> np.ndarray:
        """Symmetric grid u_j = (j - M/2) h."""
        return (np.arange(self.M) - self.M // 2) * self.h

    @property
    def momenta(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.M, d=self.h)

    @property
    def mirror(self) -> np.ndarray:
        """Index of -u_j on the ring."""
        return (self.M - np.arange(self.M)) % self.M

    def wrap(self, u) -> np.ndarray:
        """Map onto [-L/2, L/2)."""
        u = np.asarray(u, dtype=float)
        return u - self.L * np.floor(u / self.L + 0.5)


class KernelOperator:
    """Relative-coordinate kernel <u|V|u'>."""

    def matrix(self, grid: RelativeGrid) -> np.ndarray:
        """Per-ordering operator W (Jacobian and quadrature weight included)."""
        raise NotImplementedError

    def path_values(self, grid: RelativeGrid, a: int, b: int) -> np.ndarray:
        """<r1 - r2|V|2 r3 - r1 - r2> for r1 = x_a, r2 = x_b and r3 running
        over the grid, as a quadrature-ready array (discrete deltas carry 1/h)."""
        raise NotImplementedError


def _phi_on(phi, u):
    if isinstance(phi, PairPotential):
        u = np.asarray(u, dtype=float)[:, None]
        return np.asarray(phi.value(u, np.zeros_like(u)), dtype=float)
    return np.asarray(phi(np.abs(u)), dtype=float)


@dataclass(frozen=True)
class DeltaLocal(KernelOperator):
    """The local kernel: 1/2 delta(r1 - r3) phi(|r1 - r2|) along the
    integration path. ``phi`` is a local PairPotential or a callable of |u|."""

    phi: object

    def values(self, grid: RelativeGrid) -> np.ndarray:
        return _phi_on(self.phi, grid.u)

    def matrix(self, grid):
        return np.diag(0.5 * self.values(grid))

    def path_values(self, grid, a, b):
        out = np.zeros(grid.M)
        u = grid.wrap(grid.u[a] - grid.u[b])
        out[a] = 0.5 * _phi_on(self.phi, np.array([u]))[0] / grid.h
        return out


@dataclass(frozen=True)
class Separable(KernelOperator):
    """lam g(u) g(u') with g(u) = exp(-u^2 / 2 sigma_g^2)."""

    lam: float
    sigma_g: float

    def __post_init__(self):
        if self.sigma_g <= 0:
            raise ValueError("sigma_g must be positive")

    def g(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.exp(-(u**2) / (2.0 * self.sigma_g**2))

    def matrix(self, grid):
        gv = self.g(grid.u)
        return 0.5 * grid.h * self.lam * np.outer(gv, gv)

    def path_values(self, grid, a, b):
        x = grid.u
        idx = np.arange(grid.M)
        partner = (a + b - idx) % grid.M
        u = grid.wrap(x[a] - x[b])
        up = grid.wrap(x[idx] - x[partner])
        return self.lam * self.g(u) * self.g(up)


def check_kernel(W: np.ndarray, grid: RelativeGrid, tol: float = 1e-12):
    if W.shape != (grid.M, grid.M):
        raise GridMismatch(f"kernel shape {W.shape} vs grid size {grid.M}")
    scale = max(1.0, float(np.max(np.abs(W))))
    if np.max(np.abs(W - W.conj().T)) > tol * scale:
        raise NonHermitianKernel("kernel matrix is not Hermitian")
    P = grid.mirror
    if np.max(np.abs(W[np.ix_(P, P)] - W)) > tol * scale:
        raise NonHermitianKernel("kernel matrix breaks the u -> -u reflection symmetry")


def kinetic_relative(grid: RelativeGrid, mass: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """-(hbar^2 / 2 mu) d^2/du^2 spectrally, mu = m/2."""
    mu = 0.5 * mass
    F = np.fft.fft(np.eye(grid.M), axis=0) / np.sqrt(grid.M)
    t = hbar**2 * grid.momenta**2 / (2.0 * mu)
    T = (F.conj().T @ (t[:, None] * F)).real
    return 0.5 * (T + T.T)


def build_relative_hamiltonian(kernel, grid: RelativeGrid, mass: float = 1.0, hbar: float = 1.0
                               ) -> np.ndarray:
    """H_rel = T_rel + W + P W P. ``kernel`` is a KernelOperator or an
    explicit per-ordering matrix."""
    W = kernel.matrix(grid) if isinstance(kernel, KernelOperator) else np.asarray(kernel)
    check_kernel(W, grid)
    P = grid.mirror
    H = kinetic_relative(grid, mass, hbar) + W + W[np.ix_(P, P)]
    return 0.5 * (H + H.conj().T)


@dataclass
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray
    parity: np.ndarray  # +1 even, -1 odd, 0 mixed (degenerate partners)


def parity_of(vectors: np.ndarray, grid: RelativeGrid, tol: float = 1e-8) -> np.ndarray:
    ov = np.einsum("in,in->n", vectors.conj(), vectors[grid.mirror]).real
    out = np.zeros(len(ov), dtype=int)
    out[ov > 1 - tol] = 1
    out[ov < -1 + tol] = -1
    return out


def solve_spectrum(H: np.ndarray, n_states: int | None = None, grid: RelativeGrid | None = None
                   ) -> Spectrum:
    """Lowest ``n_states`` eigenpairs in ascending order."""
    n = H.shape[0] if n_states is None else min(n_states, H.shape[0])
    if n < H.shape[0]:
        E, V = sla.eigh(H, subset_by_index=[0, n - 1], driver="evr")
    else:
        E, V = sla.eigh(H, driver="evd")
    par = parity_of(V, grid) if grid is not None else np.zeros(n, dtype=int)
    return Spectrum(E, V, par)


def apply_nonlocal_phi(kernel: KernelOperator, psi: np.ndarray, grid: RelativeGrid) -> np.ndarray:
    """Integral of <r1-r2|V|2 r3 - r1 - r2> psi(r3, r1 + r2 - r3) over r3,
    for every (r1, r2) on the product grid (trapezoid on the ring)."""
    psi = np.asarray(psi)
    if psi.shape != (grid.M, grid.M):
        raise GridMismatch(f"wavefunction shape {psi.shape} vs product grid ({grid.M}, {grid.M})")
    M = grid.M
    idx = np.arange(M)
    out = np.zeros((M, M), dtype=np.result_type(psi, float))
    for a in range(M):
        for b in range(M):
            partner = (a + b - idx) % M
            out[a, b] = grid.h * np.dot(kernel.path_values(grid, a, b), psi[idx, partner])
    return out


def separable_bound_state_oracle(kernel: Separable, grid: RelativeGrid, mass: float = 1.0,
                                 hbar: float = 1.0) -> float | None:
    """Bound-state energy from 1 = -h lam sum_n |g_n|^2 / (eps_n - E), with g_n
    the unitary discrete Fourier components of g on the grid and eps_n the
    free relative energies. None when lam >= 0."""
    if kernel.lam >= 0:
        return None
    gv = kernel.g(grid.u)
    gh = np.fft.fft(gv) / np.sqrt(grid.M)
    w = np.abs(gh) ** 2
    eps = hbar**2 * grid.momenta**2 / mass  # p^2 / 2 mu with mu = m / 2
    c = grid.h * kernel.lam
    f = lambda E: 1.0 + c * np.sum(w / (eps - E))
    lo = c * float(gv @ gv) - 1.0
    # f(lo) > 0 and f -> -inf as E -> 0 from below
    hi = -min(1e-14, abs(lo) * 1e-14)
    return float(optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


def harmonic_levels(kappa: float, mass: float, n: int, hbar: float = 1.0) -> np.ndarray:
    """hbar omega (j + 1/2), omega = sqrt(kappa / mu), mu = m / 2."""
    omega = np.sqrt(kappa / (0.5 * mass))
    return hbar * omega * (np.arange(n) + 0.5)


def local_reduction_check(phi, grid: RelativeGrid, mass: float = 1.0, hbar: float = 1.0,
                          n_states: int = 10) -> float:
    """Max relative deviation of the lowest levels between the local-kernel
    path and direct diagonal addition of phi."""
    via_kernel = build_relative_hamiltonian(DeltaLocal(phi), grid, mass, hbar)
    direct = kinetic_relative(grid, mass, hbar) + np.diag(_phi_on(phi, grid.u))
    a = solve_spectrum(via_kernel, n_states).energies
    b = solve_spectrum(direct, n_states).energies
    scale = np.maximum(np.abs(b), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / scale))
