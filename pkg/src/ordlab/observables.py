"""Fourier-density order parameters, structure factors and the classical
Bogoliubov-type lower bound on the structure factor.

Sign convention throughout: rho_hat(k) = sum_i exp(-i k . r_i).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewSamples
from .geometry import ALLOWED, GENERIC, RECIPROCAL, SimulationBox, WaveVector, classify
from .montecarlo import MIN_SAMPLES, Configuration, SampleSet, blocking_stderr
from .potentials import PairPotential, derivatives


def _kvec(k) -> np.ndarray:
    return np.asarray(k.components if isinstance(k, WaveVector) else k, dtype=float)


def _kclass(k) -> str:
    return k.cls if isinstance(k, WaveVector) else GENERIC


def fourier_density(config, k) -> complex | np.ndarray:
    """sum_i exp(-i k . r_i) for a Configuration or a (..., N, 2) array."""
    pos = config.positions if isinstance(config, Configuration) else np.asarray(config, dtype=float)
    phase = pos @ _kvec(k)
    return np.exp(-1j * phase).sum(axis=-1)


def _need(samples: SampleSet):
    if len(samples) < MIN_SAMPLES:
        raise TooFewSamples(f"{len(samples)} samples; at least {MIN_SAMPLES} needed")


@dataclass(frozen=True)
class OrderParameterReport:
    k: WaveVector | np.ndarray
    rho_k: complex
    stderr: float
    cls: str

    @property
    def magnitude(self) -> float:
        return abs(self.rho_k)


def order_parameter(samples: SampleSet, k) -> OrderParameterReport:
    """rho_k = <rho_hat(k)> / N with blocking error."""
    _need(samples)
    vals = fourier_density(samples.positions(), k) / samples.n_particles
    return OrderParameterReport(k, complex(vals.mean()), blocking_stderr(vals), _kclass(k))


def structure_factor(samples: SampleSet, k) -> tuple[float, float]:
    """S(k) = <rho_hat(k) rho_hat(-k)> / N."""
    _need(samples)
    rho = fourier_density(samples.positions(), k)
    vals = (rho * rho.conj()).real / samples.n_particles
    return float(vals.mean()), blocking_stderr(vals)


@dataclass(frozen=True)
class CrystallinityReport:
    entries: list[OrderParameterReport]
    ordered: bool
    threshold: float

    def by_class(self, cls: str) -> list[OrderParameterReport]:
        return [e for e in self.entries if e.cls == cls]

    @property
    def max_reciprocal(self) -> float:
        vals = [e.magnitude for e in self.by_class(RECIPROCAL) if np.linalg.norm(_kvec(e.k)) > 0]
        return max(vals, default=0.0)


def crystallinity_report(samples: SampleSet, box: SimulationBox, kset, threshold: float = 0.1
                         ) -> CrystallinityReport:
    """Finite-size diagnostic of the crystallisation criterion.

    ``ordered`` is set when some nonzero reciprocal K has |rho_K| above the
    threshold while every sampled non-reciprocal k stays below it. This is a
    statement about the sampled system, not about the thermodynamic limit.
    """
    entries = []
    for k in kset:
        if not isinstance(k, WaveVector):
            k = classify(box, k)
        entries.append(order_parameter(samples, k))
    recip = [e for e in entries if e.cls == RECIPROCAL and np.linalg.norm(_kvec(e.k)) > 0]
    other = [e for e in entries if e.cls == ALLOWED]
    ordered = any(e.magnitude > threshold for e in recip) and all(e.magnitude <= threshold for e in other)
    return CrystallinityReport(entries, ordered, threshold)


@dataclass(frozen=True)
class BogoliubovClassicalReport:
    k: np.ndarray
    K: np.ndarray
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    pair_term: float
    kinetic_term: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def stderr(self) -> float:
        return float(np.hypot(self.lhs_stderr, self.rhs_stderr))

    def holds(self, nsigma: float = 3.0) -> bool:
        return self.slack >= -nsigma * self.stderr


def pair_bound_terms(phi: PairPotential, box: SimulationBox, pos) -> float:
    """(1/N) sum_{i != j} [ |r_ij| |grad_i Phi| / 4 + 2 |r_ij|^2 |lap_i Phi| ]
    for one configuration, minimum-image separations."""
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    iu, ju = np.nonzero(~np.eye(n, dtype=bool))
    r1, r2 = pos[iu], pos[ju]
    rij = box.min_image(r1 - r2)
    b = derivatives(phi, r1, r2, box)
    dist = np.linalg.norm(rij, axis=-1)
    terms = 0.25 * dist * np.linalg.norm(b.grad1, axis=-1) + 2.0 * dist**2 * np.abs(b.lap1)
    return float(terms.sum() / n)


def _jackknife(fn, columns, blocks: int = 16) -> float:
    s = len(columns[0])
    edges = np.linspace(0, s, blocks + 1).astype(int)
    est = []
    for b in range(blocks):
        keep = np.ones(s, dtype=bool)
        keep[edges[b]:edges[b + 1]] = False
        est.append(fn(*[c[keep].mean() for c in columns]))
    est = np.array(est)
    return float(np.sqrt((blocks - 1) / blocks * np.sum((est - est.mean()) ** 2)))


def pair_terms_per_sample(samples: SampleSet, phi: PairPotential) -> np.ndarray:
    """pair_bound_terms for every stored configuration; independent of k."""
    return np.array([pair_bound_terms(phi, samples.box, p) for p in samples.positions()])


def bogoliubov_check_classical(samples: SampleSet, phi: PairPotential, k, K, T: float | None = None,
                               hbar: float = 1.0, mass: float = 1.0,
                               pairs: np.ndarray | None = None) -> BogoliubovClassicalReport:
    """Compare S(k+K) with the assembled right-hand side.

    rhs = T (k+K)^2 |rho_{2k+K} - rho_K|^2
          / (4 k^2 [4 t + hbar^2 k^2 / 4m + <pair bound terms>])

    with t = d T / 2 from equipartition. Written with beta = 1/T so that
    beta = 0 is a finite limit. ``pairs`` may carry precomputed
    pair_terms_per_sample output when many k share one sample set.
    """
    _need(samples)
    kv, Kv = _kvec(k), _kvec(K)
    if np.linalg.norm(kv) == 0:
        raise ValueError("k must be nonzero")
    beta = samples.meta.get("beta") if T is None else (0.0 if np.isinf(T) else 1.0 / T)
    d = samples.box.dimension
    q = kv + Kv
    n = samples.n_particles
    pos = samples.positions()

    rho_q = fourier_density(pos, q)
    lhs_vals = (rho_q * rho_q.conj()).real / n
    r2k = fourier_density(pos, 2 * kv + Kv) / n
    rK = fourier_density(pos, Kv) / n
    if pairs is None:
        pairs = pair_terms_per_sample(samples, phi)

    k2 = float(kv @ kv)
    q2 = float(q @ q)
    kin = hbar**2 * k2 / (4.0 * mass)

    def rhs_of(a_re, a_im, b_re, b_im, pair):
        diff2 = (a_re - b_re) ** 2 + (a_im - b_im) ** 2
        return q2 * diff2 / (4.0 * k2 * (2.0 * d + beta * (kin + pair)))

    cols = [r2k.real, r2k.imag, rK.real, rK.imag, pairs]
    rhs = rhs_of(*[c.mean() for c in cols])
    return BogoliubovClassicalReport(
        k=kv, K=Kv,
        lhs=float(lhs_vals.mean()), lhs_stderr=blocking_stderr(lhs_vals),
        rhs=float(rhs), rhs_stderr=_jackknife(rhs_of, cols),
        pair_term=float(pairs.mean()), kinetic_term=kin,
    )


CSV_COLUMNS = ("kx", "ky", "class", "re_rho", "im_rho", "stderr", "S", "lhs", "rhs", "slack")


def observable_rows(samples: SampleSet, kset, checks: dict | None = None) -> list[dict]:
    """One row per k for the observables CSV; ``checks`` maps the index of a
    k in ``kset`` to its BogoliubovClassicalReport."""
    rows = []
    checks = checks or {}
    for idx, k in enumerate(kset):
        rep = order_parameter(samples, k)
        s, _ = structure_factor(samples, k)
        chk = checks.get(idx)
        kv = _kvec(k)
        rows.append({
            "kx": kv[0], "ky": kv[1], "class": rep.cls,
            "re_rho": rep.rho_k.real, "im_rho": rep.rho_k.imag, "stderr": rep.stderr, "S": s,
            "lhs": chk.lhs if chk else "", "rhs": chk.rhs if chk else "",
            "slack": chk.slack if chk else "",
        })
    return rows
