"""Upper bounds on the double commutator, small-k scaling, and the
dimension-dependent divergence of the integrated inequality.

Bounds are checked on exact thermal states of the quantum grid model or on
Monte Carlo samples of the classical model; each report says which.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .errors import BandLimitViolated, InsufficientPoints, InvalidRange, KindMismatch, NonPositiveValue
from .montecarlo import SampleSet, blocking_stderr
from .potentials import PairPotential, derivatives
from .quantum import (ManyBodySpace, RingPotential, ThermalState, apply_c, denominator_curve,
                      hamiltonian, potential_diagonal, thermal_average, thermal_state)

KINETIC = "kinetic"
LOCAL_BOUND = "local"
NONLOCAL_BOUND = "nonlocal"

QUANTUM = "quantum"
CLASSICAL = "classical"


@dataclass
class BoundReport:
    bound: str
    left: float
    right: float
    source: str
    params: dict = field(default_factory=dict)
    left_stderr: float = 0.0
    right_stderr: float = 0.0

    @property
    def slack(self) -> float:
        return self.right - self.left

    def holds(self, rel: float = 1e-9) -> bool:
        return self.slack >= -rel * abs(self.right)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["slack"] = self.slack
        return out


def _weighted_columns(state: ThermalState, cutoff: float = 1e-18):
    keep = state.weights > cutoff * state.weights.max()
    return state.vectors[:, keep], state.weights[keep]


def double_commutator_average(state: ThermalState, apply_c_, apply_b) -> float:
    """<[[C, B], C]> for Hermitian C and B given as column-block actions."""
    V, w = _weighted_columns(state)
    CV = apply_c_(V)
    CCV = apply_c_(CV)
    BV = apply_b(V)
    BCV = apply_b(CV)
    per = (2.0 * np.einsum("in,in->n", CV.conj(), BCV)
           - np.einsum("in,in->n", BV.conj(), CCV)
           - np.einsum("in,in->n", CCV.conj(), BV))
    return float(np.dot(w, per).real)


def _check_k(space: ManyBodySpace, k):
    kint = space.integer_wavevector(k)
    if np.max(np.abs(kint)) > space.M // 4:
        raise BandLimitViolated(f"|k| L / 2 pi = {np.max(np.abs(kint))} exceeds M/4 = {space.M // 4}")
    kv = space.vector(k)
    if not np.any(kv):
        raise ValueError("k must be nonzero")
    return kv


def kinetic_bound_check(space: ManyBodySpace, beta: float, k, phi: PairPotential | None = None,
                        state: ThermalState | None = None) -> BoundReport:
    """<[[C, T], C]> against hbar^2 k^2 N (4 t + hbar^2 k^2 / 4m), t = <T>/N."""
    kv = _check_k(space, k)
    if state is None:
        state = thermal_state(hamiltonian(space, phi), beta)
    ac = lambda X: apply_c(space, kv, X)
    left = double_commutator_average(state, ac, space.apply_kinetic)
    t = expect_kinetic(space, state) / space.N
    k2 = float(kv @ kv)
    hb = space.hbar
    right = hb**2 * k2 * space.N * (4.0 * t + hb**2 * k2 / (4.0 * space.mass))
    return BoundReport(KINETIC, left, right, QUANTUM, _params(space, kv, beta, phi))


def expect_kinetic(space: ManyBodySpace, state: ThermalState) -> float:
    V, w = _weighted_columns(state)
    return float(np.dot(w, np.einsum("in,in->n", V.conj(), space.apply_kinetic(V))).real)


def _params(space, kv, beta, phi):
    return {"k": [float(v) for v in kv], "beta": beta, "d": space.d, "M": space.M, "L": space.L,
            "N": space.N, "potential": type(phi).__name__ if phi is not None else "NullPotential"}


def _bound_id(phi: PairPotential, bound: str | None) -> str:
    expected = LOCAL_BOUND if phi.is_local else NONLOCAL_BOUND
    if bound is None:
        return expected
    if bound != expected:
        raise KindMismatch(f"bound {bound} does not apply to a {phi.kind} potential")
    return bound


def pair_bound_integrand(bound: str, kv: np.ndarray, bundle, sep: np.ndarray, hbar: float = 1.0):
    """Right-hand side integrand for one ordered pair (vectorised)."""
    k2 = float(kv @ kv)
    if bound == LOCAL_BOUND:
        dist = np.linalg.norm(sep, axis=-1)
        return hbar**2 * k2 * (0.25 * dist * np.linalg.norm(bundle.grad1, axis=-1)
                               + 2.0 * dist**2 * np.abs(bundle.lap1))
    kn = np.sqrt(k2)
    return 0.5 * hbar**2 * (np.abs(bundle.lap1) + np.abs(bundle.lap2) + 2.0 * np.abs(bundle.cross)
                            + kn * (np.linalg.norm(bundle.grad1, axis=-1)
                                    + np.linalg.norm(bundle.grad2, axis=-1)))


def pair_left_integrand(bound: str, kv: np.ndarray, r1, r2, bundle, hbar: float = 1.0):
    """Classical value of the potential double commutator for one ordered
    pair: the local reduction for the local bound, the general form otherwise.
    Laplacians throughout (per-axis sum of C components)."""
    x1, x2 = r1 @ kv, r2 @ kv
    if bound == LOCAL_BOUND:
        return 0.5 * hbar**2 * (0.5 * (np.sin(2 * x1) - np.sin(2 * x2)) * (bundle.grad1 @ kv)
                                + (np.sin(x1) - np.sin(x2)) ** 2 * bundle.lap1)
    s1, s2, c1, c2 = np.sin(x1), np.sin(x2), np.cos(x1), np.cos(x2)
    return 0.5 * hbar**2 * (s1 * c1 * (bundle.grad1 @ kv) + s2 * c2 * (bundle.grad2 @ kv)
                            + s1**2 * bundle.lap1 + s2**2 * bundle.lap2 + 2.0 * s1 * s2 * bundle.cross)


def potential_bound_check(source, phi: PairPotential, k, beta: float | None = None,
                          bound: str | None = None, state: ThermalState | None = None,
                          hbar: float = 1.0) -> BoundReport:
    """Potential part of the double commutator against its closed-form bound.

    ``source`` is a ManyBodySpace (exact thermal state at ``beta``) or a
    SampleSet (classical average over stored configurations). The local
    bound applies to local potentials and the nonlocal bound to the rest.
    """
    bound = _bound_id(phi, bound)
    if isinstance(source, ManyBodySpace):
        return _potential_bound_quantum(source, phi, k, beta, bound, state)
    if isinstance(source, SampleSet):
        return _potential_bound_classical(source, phi, k, bound, hbar)
    raise TypeError("source must be a ManyBodySpace or a SampleSet")


def _potential_bound_quantum(space, phi, k, beta, bound, state):
    kv = _check_k(space, k)
    if state is None:
        if beta is None:
            raise ValueError("beta is needed to build the thermal state")
        state = thermal_state(hamiltonian(space, phi), beta)
    U = potential_diagonal(space, phi)
    apply_u = lambda X: U[:, None] * X
    # Laplacian reading: sum over per-axis components of C
    axes = [None] if space.d == 1 else list(np.eye(space.d))
    left = sum(double_commutator_average(state, lambda X, u=u: apply_c(space, kv, X, u), apply_u)
               for u in axes)
    ring = RingPotential(phi, space.L)
    X = space.coords
    rhs = np.zeros(space.dim)
    for i in range(space.N):
        for j in range(space.N):
            if i == j:
                continue
            b = ring.bundle(X[:, i], X[:, j])
            sep = ring.separation(X[:, i], X[:, j])
            rhs += pair_bound_integrand(bound, kv, b, sep, space.hbar)
    right = thermal_average(state, rhs).real
    return BoundReport(bound, left, float(right), QUANTUM, _params(space, kv, state.beta, phi))


def _potential_bound_classical(samples, phi, k, bound, hbar):
    kv = np.asarray(k.components if hasattr(k, "components") else k, dtype=float)
    pos = samples.positions()
    S, n, _ = pos.shape
    iu, ju = np.nonzero(~np.eye(n, dtype=bool))
    r1, r2 = pos[:, iu], pos[:, ju]
    sep = samples.box.min_image(r1 - r2)
    b = derivatives(phi, r1, r2, samples.box)
    partner = r1 - sep
    left_vals = pair_left_integrand(bound, kv, r1, partner, b, hbar).sum(axis=1)
    right_vals = pair_bound_integrand(bound, kv, b, sep, hbar).sum(axis=1)
    params = {"k": [float(v) for v in kv], "beta": samples.meta.get("beta"), "N": n,
              "samples": S, "potential": type(phi).__name__}
    return BoundReport(bound, float(left_vals.mean()), float(right_vals.mean()), CLASSICAL, params,
                       blocking_stderr(left_vals), blocking_stderr(right_vals))


def sine_inequality_violations(n: int = 100_000, scale: float = 10.0, seed: int = 0) -> int:
    """Count pairs breaking |sin x +- sin y| <= |x +- y| on random draws."""
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-scale, scale, size=(2, n))
    tol = 1e-15
    minus = np.abs(np.sin(x) - np.sin(y)) > np.abs(x - y) + tol
    plus = np.abs(np.sin(x) + np.sin(y)) > np.abs(x + y) + tol
    return int(np.count_nonzero(minus | plus))


# --- small-k scaling -----------------------------------------------------------

K_SQUARED = "k-squared"
SUB_QUADRATIC = "sub-quadratic"


@dataclass
class ScalingReport:
    ks: list[float]
    values: list[float]
    alpha: float
    alpha_stderr: float
    r_squared: float
    cls: str
    threshold: float
    excluded: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def k_scaling_exponent(ks, values, threshold: float = 1.5) -> ScalingReport:
    """Least-squares slope of log(value) against log(k).

    Points whose value is within 10 machine epsilons of zero (relative to the
    largest value) are dropped first.
    """
    ks = np.asarray(ks, dtype=float)
    vals = np.asarray(values, dtype=float)
    if ks.shape != vals.shape:
        raise ValueError("ks and values differ in length")
    floor = 10.0 * np.finfo(float).eps * (np.max(np.abs(vals)) if vals.size else 0.0)
    keep = np.abs(vals) > floor
    excluded = int(np.count_nonzero(~keep))
    ks, vals = ks[keep], vals[keep]
    if np.any(vals < 0):
        raise NonPositiveValue(f"negative denominator values at k = {ks[vals < 0]}")
    if np.any(ks <= 0):
        raise NonPositiveValue("wavevector magnitudes must be positive")
    if len(ks) < 8:
        raise InsufficientPoints(f"{len(ks)} usable points; at least 8 needed")
    if ks.max() / ks.min() < 10.0 * (1 - 1e-12):
        raise InsufficientPoints(f"k range {ks.min():g}..{ks.max():g} spans less than a decade")
    x, y = np.log(ks), np.log(vals)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    se = float(np.sqrt(ss_res / dof / sxx)) if dof > 0 else float("nan")
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    alpha = float(coef[0])
    return ScalingReport(list(map(float, ks)), list(map(float, vals)), alpha, se, r2,
                         K_SQUARED if alpha >= threshold else SUB_QUADRATIC, threshold, excluded)


def measure_denominator_curve(space: ManyBodySpace, phi: PairPotential | None, orders, beta: float,
                              axis: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """<[[C, H], C]> at k = 2 pi j / L along one axis, for each j in ``orders``."""
    ks = []
    for j in orders:
        k = np.zeros(space.d)
        k[axis] = 2.0 * np.pi * j / space.L
        ks.append(k)
    vals = denominator_curve(space, phi, ks, beta)
    return np.array([np.linalg.norm(k) for k in ks]), vals


# --- divergence of the integrated bound --------------------------------------

SOLID_ANGLE = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


def divergence_closed_form(d: int, k0: float, eps: float) -> float:
    if d == 1:
        return 2.0 * (1.0 / k0 - 1.0 / eps)
    if d == 2:
        return 2.0 * np.pi * np.log(eps / k0)
    return 4.0 * np.pi * (eps - k0)


@dataclass
class DivergenceReport:
    d: int
    k0: float
    eps: float
    numeric: float
    analytic: float
    rel_error: float
    table: list[tuple[float, float]]

    def to_dict(self) -> dict:
        return asdict(self)


def _integral(d: int, k0: float, eps: float) -> float:
    # integrate in t = ln k, where the integrand is smooth
    f = lambda t: SOLID_ANGLE[d] * np.exp((d - 2) * t)
    val, _ = integrate.quad(f, np.log(k0), np.log(eps), epsabs=0.0, epsrel=1e-13, limit=200)
    return float(val)


def divergence_probe(d: int, k0: float, eps: float, halvings: int = 8) -> DivergenceReport:
    """Integral of k^(d-1) k^(-2) times the solid angle over [k0, eps].

    The table lists (k0 / 2^n, integral) for n = 0..halvings: logarithmic
    growth in 2D, 1/k0 growth in 1D, convergence in 3D.
    """
    if d not in SOLID_ANGLE:
        raise InvalidRange(f"dimension {d} not in (1, 2, 3)")
    if not (0.0 < k0 < eps) or not np.isfinite(eps):
        raise InvalidRange(f"need 0 < k0 < eps, got k0={k0}, eps={eps}")
    num = _integral(d, k0, eps)
    exact = divergence_closed_form(d, k0, eps)
    table = [(k0 / 2**n, _integral(d, k0 / 2**n, eps)) for n in range(halvings + 1)]
    return DivergenceReport(d, k0, eps, num, exact, abs(num - exact) / abs(exact), table)
