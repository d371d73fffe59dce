"""Pair potentials Phi(r1, r2) and their analytic derivative bundles.

Everything is vectorised over leading axes: positions have shape ``(..., d)``
with ``d`` 1 or 2. Units follow hbar = m = k_B = 1.

Local potentials depend on r1 - r2 only. ``SubstrateCoupled`` is a genuinely
two-point interaction: the Gaussian core plus a term modulated by the pair's
centre of mass, which breaks joint translation invariance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValue

LOCAL = "local"
NONLOCAL = "nonlocal-two-point"


@dataclass(frozen=True)
class DerivativeBundle:
    grad1: np.ndarray
    grad2: np.ndarray
    hess11: np.ndarray
    hess22: np.ndarray
    hess12: np.ndarray  # d^2 Phi / dr1_a dr2_b

    @property
    def lap1(self) -> np.ndarray:
        return np.trace(self.hess11, axis1=-2, axis2=-1)

    @property
    def lap2(self) -> np.ndarray:
        return np.trace(self.hess22, axis1=-2, axis2=-1)

    @property
    def cross(self) -> np.ndarray:
        """grad1 . grad2 Phi"""
        return np.trace(self.hess12, axis1=-2, axis2=-1)

    def along(self, e) -> tuple[np.ndarray, ...]:
        """First and second derivatives along unit vector ``e``.

        Returns (e.grad1, e.grad2, e.H11.e, e.H22.e, e.H12.e).
        """
        e = np.asarray(e, dtype=float)
        return (
            self.grad1 @ e,
            self.grad2 @ e,
            np.einsum("...ab,a,b->...", self.hess11, e, e),
            np.einsum("...ab,a,b->...", self.hess22, e, e),
            np.einsum("...ab,a,b->...", self.hess12, e, e),
        )

    def __add__(self, other: "DerivativeBundle") -> "DerivativeBundle":
        return DerivativeBundle(
            self.grad1 + other.grad1,
            self.grad2 + other.grad2,
            self.hess11 + other.hess11,
            self.hess22 + other.hess22,
            self.hess12 + other.hess12,
        )


class PairPotential:
    """Two-point interaction. Subclasses implement ``value`` and ``bundle``
    on raw (unwrapped) positions."""

    kind: str = LOCAL
    decaying: bool = True  # image sums over a periodic cell converge

    def value(self, r1, r2) -> np.ndarray:
        raise NotImplementedError

    def bundle(self, r1, r2) -> DerivativeBundle:
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    @property
    def is_local(self) -> bool:
        return self.kind == LOCAL


class LocalPotential(PairPotential):
    """Phi(r1, r2) = f(r1 - r2); subclasses give f, grad f, hess f of u."""

    kind = LOCAL

    def profile(self, u):
        raise NotImplementedError

    def value(self, r1, r2):
        u = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
        return self.profile(u)[0]

    def bundle(self, r1, r2):
        u = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
        _, g, h = self.profile(u)
        return DerivativeBundle(g, -g, h, h.copy(), -h)


@dataclass(frozen=True)
class NullPotential(LocalPotential):
    def profile(self, u):
        u = np.asarray(u, dtype=float)
        d = u.shape[-1]
        return (
            np.zeros(u.shape[:-1]),
            np.zeros_like(u),
            np.zeros(u.shape[:-1] + (d, d)),
        )


@dataclass(frozen=True)
class GaussianCore(LocalPotential):
    """phi(r) = eps0 exp(-r^2 / sigma^2), repulsive (eps0 >= 0)."""

    eps0: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.eps0 < 0:
            raise ValueError("GaussianCore is the repulsive family; eps0 must be >= 0")

    def profile(self, u):
        u = np.asarray(u, dtype=float)
        s2 = self.sigma**2
        r2 = np.sum(u * u, axis=-1)
        f = self.eps0 * np.exp(-r2 / s2)
        g = (-2.0 / s2) * u * f[..., None]
        d = u.shape[-1]
        eye = np.eye(d)
        h = (-2.0 / s2 * eye + 4.0 / s2**2 * u[..., :, None] * u[..., None, :]) * f[..., None, None]
        return f, g, h

    def value(self, r1, r2):
        u = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
        return self.eps0 * np.exp(-np.sum(u * u, axis=-1) / self.sigma**2)

    def params(self):
        return {"eps0": self.eps0, "sigma": self.sigma}


@dataclass(frozen=True)
class HarmonicPair(LocalPotential):
    """phi(r) = kappa r^2 / 2. Not decaying: periodic use relies on the
    minimum image."""

    kappa: float = 1.0
    decaying = False

    def profile(self, u):
        u = np.asarray(u, dtype=float)
        d = u.shape[-1]
        f = 0.5 * self.kappa * np.sum(u * u, axis=-1)
        g = self.kappa * u
        h = np.broadcast_to(self.kappa * np.eye(d), u.shape[:-1] + (d, d)).copy()
        return f, g, h

    def value(self, r1, r2):
        u = np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float)
        return 0.5 * self.kappa * np.sum(u * u, axis=-1)

    def params(self):
        return {"kappa": self.kappa}


@dataclass(frozen=True)
class SubstrateCoupled(PairPotential):
    """Gaussian core plus g cos(G.(r1+r2)) exp(-|r1-r2|^2 / sigma_g^2).

    ``G`` should be commensurate with the periodic cell it is used in, so the
    potential stays single valued under wrapping.
    """

    eps0: float = 1.0
    sigma: float = 1.0
    g: float = 0.5
    G: tuple = (2.0 * np.pi, 0.0)
    sigma_g: float | None = None

    kind = NONLOCAL

    def __post_init__(self):
        object.__setattr__(self, "G", tuple(float(v) for v in np.atleast_1d(self.G)))
        if self.sigma_g is None:
            object.__setattr__(self, "sigma_g", self.sigma)
        if self.sigma <= 0 or self.sigma_g <= 0:
            raise ValueError("widths must be positive")

    @property
    def core(self) -> GaussianCore:
        return GaussianCore(self.eps0, self.sigma)

    def _G(self, d):
        G = np.asarray(self.G, dtype=float)
        if G.size < d:
            raise ValueError(f"G has {G.size} components, positions have {d}")
        return G[:d]

    def _modulation(self, r1, r2):
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        G = self._G(r1.shape[-1])
        u = r1 - r2
        phase = (r1 + r2) @ G
        s2 = self.sigma_g**2
        e = np.exp(-np.sum(u * u, axis=-1) / s2)
        return G, u, phase, e, s2

    def value(self, r1, r2):
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        _, _, phase, e, _ = self._modulation(r1, r2)
        return self.core.value(r1, r2) + self.g * np.cos(phase) * e

    def bundle(self, r1, r2):
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        base = self.core.bundle(r1, r2)
        G, u, phase, e, s2 = self._modulation(r1, r2)
        d = u.shape[-1]
        c = (self.g * np.cos(phase) * e)[..., None]
        s = (self.g * np.sin(phase) * e)[..., None]
        de = -2.0 / s2 * u  # grad_u e / e
        he = -2.0 / s2 * np.eye(d) + de[..., :, None] * de[..., None, :]  # hess_u e / e
        GG = np.outer(G, G)
        Gde = G[:, None] * de[..., None, :]  # G_a de_b
        deG = de[..., :, None] * G[None, :]  # de_a G_b
        c2 = c[..., None]
        s2_ = s[..., None]
        grad1 = -s * G + c * de
        grad2 = -s * G - c * de
        hess11 = -c2 * GG - s2_ * (Gde + deG) + c2 * he
        hess22 = -c2 * GG + s2_ * (Gde + deG) + c2 * he
        hess12 = -c2 * GG + s2_ * (Gde - deG) - c2 * he
        return base + DerivativeBundle(grad1, grad2, hess11, hess22, hess12)

    def params(self):
        return {"eps0": self.eps0, "sigma": self.sigma, "g": self.g,
                "G": list(self.G), "sigma_g": self.sigma_g}


@dataclass(frozen=True)
class Periodized(PairPotential):
    """Image sum of ``base`` over a hypercubic period ``length``.

    Phi_per(r1, r2) = sum_n base(r1, r2 + n length) with |n_a| <= images.
    For a decaying base this is the smooth periodic continuation used on the
    quantum grid.
    """

    base: PairPotential
    length: float
    images: int = 3

    @property
    def kind(self):
        return self.base.kind

    def _shifts(self, d):
        rng = range(-self.images, self.images + 1)
        return [np.array(n, dtype=float) * self.length for n in itertools.product(rng, repeat=d)]

    def value(self, r1, r2):
        r2 = np.asarray(r2, dtype=float)
        return sum(self.base.value(r1, r2 + s) for s in self._shifts(r2.shape[-1]))

    def bundle(self, r1, r2):
        r2 = np.asarray(r2, dtype=float)
        shifts = self._shifts(r2.shape[-1])
        out = self.base.bundle(r1, r2 + shifts[0])
        for s in shifts[1:]:
            out = out + self.base.bundle(r1, r2 + s)
        return out

    def params(self):
        return {"base": type(self.base).__name__, "length": self.length, "images": self.images}


def periodize(phi: PairPotential, length: float, tail: float = 1e-18) -> PairPotential:
    """Smooth periodic version of ``phi`` on a cell of side ``length``.

    Decaying Gaussian families get an image sum wide enough that the dropped
    tail is below ``tail``; other potentials are returned unchanged and rely on
    the minimum image.
    """
    widths = [getattr(phi, "sigma", None), getattr(phi, "sigma_g", None)]
    widths = [w for w in widths if w]
    if not phi.decaying or not widths or isinstance(phi, NullPotential):
        return phi
    w = max(widths)
    reach = w * np.sqrt(-np.log(tail))
    images = int(np.ceil(reach / length)) + 1
    return Periodized(phi, length, images)


def _image_partner(box, r1, r2):
    if box is None:
        return np.asarray(r2, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    return r1 - box.min_image(r1 - np.asarray(r2, dtype=float))


def evaluate(phi: PairPotential, r1, r2, box=None) -> np.ndarray:
    """Phi(r1, r2); with a box the second particle is taken at its image
    nearest the first."""
    r2 = _image_partner(box, r1, r2)
    with np.errstate(over="ignore", invalid="ignore"):
        v = phi.value(r1, r2)
    if not np.all(np.isfinite(v)):
        raise NonFiniteValue(f"{type(phi).__name__} produced a non-finite energy")
    return v


def derivatives(phi: PairPotential, r1, r2, box=None) -> DerivativeBundle:
    r2 = _image_partner(box, r1, r2)
    return phi.bundle(r1, r2)


FAMILIES = {
    "gaussian_core": GaussianCore,
    "substrate_coupled": SubstrateCoupled,
    "harmonic_pair": HarmonicPair,
    "null": NullPotential,
}


def from_config(block: dict) -> PairPotential:
    """Build a potential from ``{"family": ..., **parameters}``."""
    block = dict(block)
    family = block.pop("family")
    if family not in FAMILIES:
        raise ValueError(f"unknown potential family {family!r}")
    if "G" in block:
        block["G"] = tuple(block["G"])
    return FAMILIES[family](**block)
