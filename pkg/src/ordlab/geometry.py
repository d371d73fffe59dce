"""Bravais cells, periodic boxes and the wavevectors they admit.

Positions are handled in fractional coordinates of the box edges; Cartesian
vectors are produced on demand. A one-dimensional system is a box with
``n2 == 1`` and an orthogonal ``a2``; particles then live on the ``a1`` axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import DegenerateCell

TWO_PI = 2.0 * np.pi

RECIPROCAL = "reciprocal"
ALLOWED = "allowed-nonreciprocal"
GENERIC = "generic"


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


@dataclass(frozen=True)
class LatticeSpec:
    a1: tuple[float, float]
    a2: tuple[float, float]
    n1: int
    n2: int
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "a1", tuple(float(v) for v in self.a1))
        object.__setattr__(self, "a2", tuple(float(v) for v in self.a2))
        if len(self.a1) != 2 or len(self.a2) != 2:
            raise ValueError("a1 and a2 must be 2-component vectors")
        if int(self.n1) < 1 or int(self.n2) < 1:
            raise ValueError("repetition counts must be >= 1")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.dimension == 1:
            if self.n2 != 1:
                raise ValueError("a 1D lattice uses n2 == 1")
            if abs(np.dot(self.a1, self.a2)) > 1e-12 * np.linalg.norm(self.a1) * np.linalg.norm(self.a2):
                raise ValueError("a 1D lattice needs a2 orthogonal to a1")

    @property
    def basis(self) -> np.ndarray:
        """Rows are a1 and a2."""
        return np.array([self.a1, self.a2])

    @property
    def cell_area(self) -> float:
        return abs(_cross(self.a1, self.a2))

    @classmethod
    def square(cls, n: int, spacing: float = 1.0) -> "LatticeSpec":
        return cls((spacing, 0.0), (0.0, spacing), n, n)

    @classmethod
    def triangular(cls, n1: int, n2: int, spacing: float = 1.0) -> "LatticeSpec":
        return cls((spacing, 0.0), (0.5 * spacing, 0.5 * np.sqrt(3.0) * spacing), n1, n2)

    @classmethod
    def chain(cls, n: int, spacing: float = 1.0) -> "LatticeSpec":
        return cls((spacing, 0.0), (0.0, 1.0), n, 1, dimension=1)


@dataclass(frozen=True, eq=False)
class SimulationBox:
    spec: LatticeSpec
    edge1: np.ndarray
    edge2: np.ndarray
    area: float
    _inverse: np.ndarray = field(repr=False)

    @property
    def edges(self) -> np.ndarray:
        """Rows are the two box edges."""
        return np.array([self.edge1, self.edge2])

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def to_cartesian(self, frac) -> np.ndarray:
        return np.asarray(frac, dtype=float) @ self.edges

    def to_fractional(self, cart) -> np.ndarray:
        return np.asarray(cart, dtype=float) @ self._inverse

    def wrap(self, frac) -> np.ndarray:
        """Map fractional coordinates into [0, 1)."""
        f = np.mod(np.asarray(frac, dtype=float), 1.0)
        # np.mod can return exactly 1.0 for tiny negative inputs
        f[f >= 1.0] = 0.0
        return f

    def min_image(self, dr) -> np.ndarray:
        return min_image(self, dr)


def build_box(spec: LatticeSpec) -> SimulationBox:
    area_cell = spec.cell_area
    scale = np.linalg.norm(spec.a1) * np.linalg.norm(spec.a2)
    if area_cell <= 1e-14 * scale or area_cell == 0.0:
        raise DegenerateCell(f"cell vectors {spec.a1}, {spec.a2} are collinear")
    edge1 = spec.n1 * np.asarray(spec.a1)
    edge2 = spec.n2 * np.asarray(spec.a2)
    edges = np.array([edge1, edge2])
    return SimulationBox(
        spec=spec,
        edge1=edge1,
        edge2=edge2,
        area=abs(_cross(edge1, edge2)),
        _inverse=np.linalg.inv(edges),
    )


@dataclass(frozen=True, eq=False)
class WaveVector:
    components: np.ndarray
    cls: str = GENERIC
    m1: int | None = None
    m2: int | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    @property
    def is_zero(self) -> bool:
        return self.m1 == 0 and self.m2 == 0 if self.m1 is not None else self.norm == 0.0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.components, dtype=dtype)


def reciprocal_basis(spec: LatticeSpec) -> tuple[WaveVector, WaveVector]:
    """b1, b2 with a_i . b_j = 2 pi delta_ij."""
    a = spec.basis
    if spec.cell_area <= 1e-14 * np.linalg.norm(a[0]) * np.linalg.norm(a[1]):
        raise DegenerateCell(f"cell vectors {spec.a1}, {spec.a2} are collinear")
    b = TWO_PI * np.linalg.inv(a).T
    return (
        WaveVector(b[0], RECIPROCAL, spec.n1, 0),
        WaveVector(b[1], RECIPROCAL, 0, spec.n2),
    )


def grid_vector(box: SimulationBox, m1: int, m2: int) -> WaveVector:
    """The allowed wavevector (m1/N1) b1 + (m2/N2) b2, classified."""
    spec = box.spec
    b1, b2 = reciprocal_basis(spec)
    k = (m1 / spec.n1) * b1.components + (m2 / spec.n2) * b2.components
    cls = RECIPROCAL if (m1 % spec.n1 == 0 and m2 % spec.n2 == 0) else ALLOWED
    return WaveVector(k, cls, int(m1), int(m2))


def wavevector_grid(box: SimulationBox, max_order: int) -> list[WaveVector]:
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    spec = box.spec
    span = max_order * max(spec.n1, spec.n2)
    m2_range = [0] if spec.dimension == 1 else range(-span, span + 1)
    return [grid_vector(box, m1, m2) for m1 in range(-span, span + 1) for m2 in m2_range]


def classify(box: SimulationBox, k, tol: float = 1e-9) -> WaveVector:
    """Classify an arbitrary vector against the box's allowed grid."""
    k = np.asarray(k, dtype=float)
    m = box.edges @ k / TWO_PI
    mi = np.rint(m)
    if np.any(np.abs(m - mi) > tol):
        return WaveVector(k, GENERIC)
    m1, m2 = int(mi[0]), int(mi[1])
    if box.dimension == 1 and m2 != 0:
        return WaveVector(k, GENERIC)
    return grid_vector(box, m1, m2)


def translations(spec: LatticeSpec) -> Iterator[np.ndarray]:
    """Lattice translations n1 a1 + n2 a2 with 0 <= n_i < N_i."""
    a = spec.basis
    for i in range(spec.n1):
        for j in range(spec.n2):
            yield i * a[0] + j * a[1]


def phase_is_unity(k, spec: LatticeSpec, tol: float = 1e-10) -> bool:
    """Direct test of exp(i k.t) == 1 over all cell translations."""
    k = np.asarray(k, dtype=float)
    return all(abs(np.exp(1j * np.dot(k, t)) - 1.0) < tol for t in translations(spec))


def min_image(box: SimulationBox, dr) -> np.ndarray:
    """Minimum-image displacement; fractional parts land in [-1/2, 1/2).

    Computed in fractional coordinates, exact for rectangular cells and
    adequate for mildly skewed ones.
    """
    f = box.to_fractional(dr)
    f = f - np.floor(f + 0.5)
    return box.to_cartesian(f)


def lattice_sites(box: SimulationBox, per_cell: int = 1) -> np.ndarray:
    """Fractional coordinates of ideal Bravais sites, ``per_cell`` per cell.

    Extra particles in a cell are placed along the cell diagonal (or along a1
    in 1D) at equal spacing.
    """
    spec = box.spec
    if per_cell < 1:
        raise ValueError("per_cell must be >= 1")
    offsets = np.arange(per_cell) / per_cell
    sites = []
    for i in range(spec.n1):
        for j in range(spec.n2):
            for o in offsets:
                oy = 0.0 if spec.dimension == 1 else o
                sites.append(((i + o) / spec.n1, (j + oy) / spec.n2))
    return np.array(sites, dtype=float)


def reciprocal_shell(box: SimulationBox, shell: int = 1, tol: float = 1e-9) -> list[WaveVector]:
    """Nonzero reciprocal vectors of the ``shell``-th smallest length."""
    spec = box.spec
    span = shell + 1
    m2s = [0] if spec.dimension == 1 else range(-span, span + 1)
    vecs = [grid_vector(box, i * spec.n1, j * spec.n2) for i in range(-span, span + 1) for j in m2s
            if (i, j) != (0, 0)]
    norms = sorted({round(v.norm / tol) for v in vecs})
    target = norms[shell - 1] * tol
    return [v for v in vecs if abs(v.norm - target) <= 2 * tol]


def first_zone(box: SimulationBox, tol: float = 1e-9) -> list[WaveVector]:
    """Allowed nonzero wavevectors no farther from the origin than from any
    nonzero reciprocal vector (first Brillouin zone, boundary included)."""
    shells = reciprocal_shell(box, 1) + reciprocal_shell(box, 2) if box.dimension == 2 else reciprocal_shell(box, 1)
    out = []
    for k in wavevector_grid(box, 1):
        if k.is_zero:
            continue
        kc = k.components
        if all(np.linalg.norm(kc) <= np.linalg.norm(kc - G.components) + tol for G in shells):
            out.append(k)
    return out
