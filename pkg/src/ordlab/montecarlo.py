"""Canonical Metropolis sampling of particle configurations.

The chain targets exp(-beta U) with U = 1/2 sum_{i != j} Phi(r_i, r_j), using
single-particle Gaussian displacements. The step size is tuned towards a
target acceptance during equilibration and then frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewSamples
from .geometry import SimulationBox, lattice_sites
from .potentials import PairPotential, evaluate

log = logging.getLogger(__name__)

MIN_SAMPLES = 64


@dataclass
class Configuration:
    box: SimulationBox
    frac: np.ndarray  # (N, 2) in [0, 1)

    def __post_init__(self):
        self.frac = np.array(self.frac, dtype=float)
        if self.frac.ndim != 2 or self.frac.shape[1] != 2:
            raise ValueError("fractional positions must have shape (N, 2)")
        if np.any(self.frac < 0) or np.any(self.frac >= 1):
            raise ValueError("fractional coordinates must lie in [0, 1)")

    @property
    def n(self) -> int:
        return len(self.frac)

    @property
    def positions(self) -> np.ndarray:
        return self.box.to_cartesian(self.frac)


def initial_configuration(box: SimulationBox, per_cell: int = 1, jitter: float = 0.0,
                          seed: int | None = None) -> Configuration:
    """Particles on ideal Bravais sites, optionally jittered by a Gaussian of
    width ``jitter`` (length units)."""
    frac = lattice_sites(box, per_cell)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        disp = jitter * rng.standard_normal(frac.shape)
        if box.dimension == 1:
            disp[:, 1] = 0.0
        frac = box.wrap(frac + box.to_fractional(disp))
    return Configuration(box, frac)


@dataclass(frozen=True)
class ChainParams:
    beta: float
    total_sweeps: int
    equilibration_sweeps: int
    initial_step: float = 0.1
    seed: int = 0
    thinning: int = 10
    target_acceptance: float = 0.4
    fix_center_of_mass: bool = False

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.equilibration_sweeps < self.total_sweeps:
            raise ValueError("need 0 <= equilibration_sweeps < total_sweeps")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")


@dataclass
class SampleSet:
    box: SimulationBox
    frac: np.ndarray  # (S, N, 2)
    energies: np.ndarray  # (S,)
    sweeps: np.ndarray  # (S,)
    acceptance: np.ndarray  # running production acceptance at each stored sample
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.energies)

    @property
    def n_particles(self) -> int:
        return self.frac.shape[1]

    def positions(self) -> np.ndarray:
        """Cartesian positions, shape (S, N, 2)."""
        return self.box.to_cartesian(self.frac)

    def configuration(self, s: int) -> Configuration:
        return Configuration(self.box, self.frac[s])

    def halves(self) -> tuple["SampleSet", "SampleSet"]:
        h = len(self) // 2
        return self._slice(slice(0, h)), self._slice(slice(h, 2 * h))

    def _slice(self, sl):
        return SampleSet(self.box, self.frac[sl], self.energies[sl], self.sweeps[sl],
                         self.acceptance[sl], dict(self.meta))

    @staticmethod
    def merge(sets: list["SampleSet"]) -> "SampleSet":
        """Concatenate chains in seed order."""
        if not sets:
            raise ValueError("nothing to merge")
        ordered = sorted(sets, key=lambda s: s.meta.get("seed", 0))
        meta = {"seeds": [s.meta.get("seed") for s in ordered]}
        return SampleSet(
            ordered[0].box,
            np.concatenate([s.frac for s in ordered]),
            np.concatenate([s.energies for s in ordered]),
            np.concatenate([s.sweeps for s in ordered]),
            np.concatenate([s.acceptance for s in ordered]),
            meta,
        )


def pair_matrix(phi: PairPotential, box: SimulationBox, pos) -> np.ndarray:
    """Phi(r_i, r_j) for all ordered pairs; diagonal zeroed."""
    pos = np.asarray(pos, dtype=float)
    n = len(pos)
    r1 = np.broadcast_to(pos[:, None, :], (n, n, pos.shape[1]))
    r2 = np.broadcast_to(pos[None, :, :], (n, n, pos.shape[1]))
    m = evaluate(phi, r1, r2, box)
    np.fill_diagonal(m, 0.0)
    return m


def total_energy(config: Configuration, phi: PairPotential) -> float:
    """U = 1/2 sum over ordered pairs i != j of Phi(r_i, r_j)."""
    return 0.5 * float(pair_matrix(phi, config.box, config.positions).sum())


def _particle_energy(phi, box, pos, i, ri):
    others = np.delete(pos, i, axis=0)
    return float(np.sum(evaluate(phi, np.broadcast_to(ri, others.shape), others, box)))


def metropolis_accept(delta_u: float, beta: float, uniform: float) -> bool:
    """Metropolis rule min(1, exp(-beta dU)) against a uniform draw."""
    if delta_u <= 0.0 or beta == 0.0:
        return True
    return uniform < np.exp(-beta * delta_u)


def metropolis_chain(init: Configuration, phi: PairPotential, params: ChainParams) -> SampleSet:
    box = init.box
    rng = np.random.default_rng(params.seed)
    frac = init.frac.copy()
    pos = box.to_cartesian(frac)
    n = len(frac)
    one_d = box.dimension == 1
    u_total = total_energy(init, phi)
    step = params.initial_step

    kept_frac, kept_u, kept_sweep, kept_acc = [], [], [], []
    prod_tried = prod_accepted = 0
    window_tried = window_accepted = 0
    adapt_every = 10
    pin = params.fix_center_of_mass
    if pin and not phi.is_local:
        raise ValueError("centre-of-mass pinning needs a translation-invariant (local) potential")
    drift = np.zeros(2)

    for sweep in range(params.total_sweeps):
        equilibrating = sweep < params.equilibration_sweeps
        picks = rng.integers(0, n, size=n)
        kicks = rng.standard_normal((n, 2))
        draws = rng.random(n)
        if one_d:
            kicks[:, 1] = 0.0
        for t in range(n):
            i = picks[t]
            new_frac = box.wrap(frac[i] + box.to_fractional(step * kicks[t]))
            new_pos = box.to_cartesian(new_frac)
            old_e = _particle_energy(phi, box, pos, i, pos[i])
            new_e = _particle_energy(phi, box, pos, i, new_pos)
            du = new_e - old_e
            ok = metropolis_accept(du, params.beta, draws[t])
            if ok:
                frac[i] = new_frac
                pos[i] = new_pos
                u_total += du
                drift += step * kicks[t] / n
            if equilibrating:
                window_tried += 1
                window_accepted += ok
            else:
                prod_tried += 1
                prod_accepted += ok

        if pin:
            # a common shift leaves U unchanged for local Phi
            frac = box.wrap(frac - box.to_fractional(drift))
            pos = box.to_cartesian(frac)
            drift[:] = 0.0
        if equilibrating and (sweep + 1) % adapt_every == 0:
            rate = window_accepted / window_tried
            step *= float(np.clip(np.exp(rate - params.target_acceptance), 0.5, 2.0))
            window_tried = window_accepted = 0
        if not equilibrating and (sweep + 1 - params.equilibration_sweeps) % params.thinning == 0:
            kept_frac.append(frac.copy())
            kept_u.append(u_total)
            kept_sweep.append(sweep + 1)
            kept_acc.append(prod_accepted / prod_tried)

    rate = float(prod_accepted / prod_tried) if prod_tried else float("nan")
    log.debug("chain seed=%d done: acceptance %.3f, step %.4g", params.seed, rate, step)
    meta = {
        "seed": params.seed,
        "beta": params.beta,
        "acceptance_rate": rate,
        "step": step,
        "final_energy": u_total,
        "thinning": params.thinning,
    }
    return SampleSet(box, np.array(kept_frac).reshape(-1, n, 2), np.array(kept_u),
                     np.array(kept_sweep), np.array(kept_acc), meta)


def blocking_levels(x) -> list[tuple[int, float, float]]:
    """(block size, stderr, uncertainty of stderr) for block sizes 1, 2, 4, ..."""
    x = np.asarray(x, dtype=float)
    out = []
    size = 1
    while len(x) >= 16:
        n = len(x)
        se = float(np.std(x, ddof=1) / np.sqrt(n))
        out.append((size, se, se / np.sqrt(2.0 * (n - 1))))
        m = n // 2
        x = 0.5 * (x[: 2 * m : 2] + x[1 : 2 * m : 2])
        size *= 2
    return out


def blocking_stderr(x) -> float:
    """Standard error of the mean from blocking, read at the first plateau.

    Complex inputs combine the real and imaginary errors in quadrature.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return float(np.hypot(blocking_stderr(x.real), blocking_stderr(x.imag)))
    levels = blocking_levels(x)
    if not levels:
        return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
    for (_, se, _), (_, se_next, err_next) in zip(levels, levels[1:]):
        if se_next - se <= err_next:
            return se
    return max(se for _, se, _ in levels)


def ensemble_average(samples: SampleSet, f) -> tuple[complex | float, float]:
    """Mean and blocking stderr of an observable.

    ``f`` is either a per-sample array or a callable taking the (S, N, 2)
    Cartesian positions and returning one value per sample.
    """
    values = np.asarray(f(samples.positions()) if callable(f) else f)
    if len(values) < MIN_SAMPLES:
        raise TooFewSamples(f"{len(values)} samples; at least {MIN_SAMPLES} needed")
    mean = values.mean()
    mean = complex(mean) if np.iscomplexobj(values) else float(mean)
    return mean, blocking_stderr(values)
