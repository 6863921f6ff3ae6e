"""Stadium and rectangle domains and the staggered interior grids built on them.

Grid nodes sit at ((i + 1/2) h, (j + 1/2) h) for integer lattice indices
(i, j), so no node ever lies on a symmetry axis.  Reflection across the
y-axis maps i -> -i - 1, across the x-axis j -> -j - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

__all__ = [
    "EmptyGrid",
    "NotReflectionClosed",
    "StadiumGeometry",
    "RectangleGeometry",
    "GridSpec",
    "Grid",
    "SYMMETRY_CLASSES",
    "contains",
    "area",
    "perimeter",
    "build_grid",
    "geometry_from_dict",
]

SYMMETRY_CLASSES = ("EE", "EO", "OE", "OO")


class EmptyGrid(ValueError):
    """No staggered lattice point lies strictly inside the domain."""


@dataclass(frozen=True)
class StadiumGeometry:
    """Two semicircles of radius ``r`` joined by straight segments of length 2a."""

    a: float
    r: float = 1.0

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ValueError(f"stadium half-length a must be >= 0, got {self.a}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"stadium radius r must be > 0, got {self.r}")

    @property
    def half_extent(self) -> tuple[float, float]:
        return self.a + self.r, self.r

    def to_dict(self) -> dict:
        return {"shape": "stadium", "a": self.a, "r": self.r}


@dataclass(frozen=True)
class RectangleGeometry:
    """Axis-aligned rectangle centred at the origin (analytic oracle domain)."""

    lx: float
    ly: float

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"rectangle sides must be > 0, got {self.lx} x {self.ly}")

    @property
    def half_extent(self) -> tuple[float, float]:
        return self.lx / 2, self.ly / 2

    def to_dict(self) -> dict:
        return {"shape": "rectangle", "lx": self.lx, "ly": self.ly}


Geometry = Union[StadiumGeometry, RectangleGeometry]


def geometry_from_dict(d: dict) -> Geometry:
    shape = d.get("shape", "stadium")
    if shape == "stadium":
        return StadiumGeometry(float(d["a"]), float(d.get("r", 1.0)))
    if shape == "rectangle":
        return RectangleGeometry(float(d["lx"]), float(d["ly"]))
    raise ValueError(f"unknown shape {shape!r}")


def _contains_xy(geometry: Geometry, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(geometry, RectangleGeometry):
        return (np.abs(x) < geometry.lx / 2) & (np.abs(y) < geometry.ly / 2)
    a, r = geometry.a, geometry.r
    ax = np.abs(x)
    return ((ax <= a) & (np.abs(y) < r)) | ((ax - a) ** 2 + y**2 < r * r)


def contains(geometry: Geometry, p) -> bool:
    """True iff ``p`` is strictly inside the (open) domain."""
    return bool(_contains_xy(geometry, p[0], p[1]))


def area(geometry: Geometry) -> float:
    if isinstance(geometry, RectangleGeometry):
        return geometry.lx * geometry.ly
    return math.pi * geometry.r**2 + 4 * geometry.a * geometry.r


def perimeter(geometry: Geometry) -> float:
    if isinstance(geometry, RectangleGeometry):
        return 2 * (geometry.lx + geometry.ly)
    return 2 * math.pi * geometry.r + 4 * geometry.a


@dataclass(frozen=True)
class GridSpec:
    """Grid spacing plus solve mode.

    ``symmetry_class`` is ``None`` for the full domain.  Otherwise only the
    upper-right quadrant is kept and the two letters give the parity forced
    under x -> -x and under y -> -y respectively.
    """

    h: float
    symmetry_class: str | None = None

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"grid spacing must be > 0, got {self.h}")
        if self.symmetry_class is not None and self.symmetry_class not in SYMMETRY_CLASSES:
            raise ValueError(f"unknown symmetry class {self.symmetry_class!r}")

    @property
    def quadrant(self) -> bool:
        return self.symmetry_class is not None

    @property
    def mode(self) -> str:
        return "quadrant" if self.quadrant else "full"


@dataclass(eq=False)
class Grid:
    """Interior nodes of a staggered lattice, ordered row-major by (j, i)."""

    geometry: Geometry
    spec: GridSpec
    i: np.ndarray
    j: np.ndarray
    # lookup[j - j0, i - i0] is the node index or -1
    lookup: np.ndarray = field(repr=False)
    i0: int = 0
    j0: int = 0

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def n(self) -> int:
        return len(self.i)

    @property
    def x(self) -> np.ndarray:
        return (self.i + 0.5) * self.h

    @property
    def y(self) -> np.ndarray:
        return (self.j + 0.5) * self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def index_of(self, i, j):
        """Node index for lattice coordinates (vectorised); -1 where absent."""
        ii, jj = np.broadcast_arrays(np.asarray(i) - self.i0, np.asarray(j) - self.j0)
        ok = (ii >= 0) & (ii < self.lookup.shape[1]) & (jj >= 0) & (jj < self.lookup.shape[0])
        out = np.full(ii.shape, -1, dtype=np.int64)
        out[ok] = self.lookup[jj[ok], ii[ok]]
        return out

    def reflection_index(self, axis: str) -> np.ndarray:
        """Permutation mapping each node to its mirror image.

        ``axis="x"`` negates the x coordinate, ``axis="y"`` negates y.
        """
        if self.spec.quadrant:
            raise NotReflectionClosed("quadrant grids are not closed under reflection")
        if axis == "x":
            idx = self.index_of(-self.i - 1, self.j)
        elif axis == "y":
            idx = self.index_of(self.i, -self.j - 1)
        else:
            raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
        if np.any(idx < 0):
            raise NotReflectionClosed(f"grid not closed under {axis}-reflection")
        return idx


class NotReflectionClosed(ValueError):
    pass


def build_grid(geometry: Geometry, spec: GridSpec) -> Grid:
    h = spec.h
    hx, hy = geometry.half_extent
    imax = int(math.ceil(hx / h)) + 1
    jmax = int(math.ceil(hy / h)) + 1
    i0, j0 = (0, 0) if spec.quadrant else (-imax, -jmax)
    ii = np.arange(i0, imax)
    jj = np.arange(j0, jmax)
    J, I = np.meshgrid(jj, ii, indexing="ij")
    inside = _contains_xy(geometry, (I + 0.5) * h, (J + 0.5) * h)
    if not inside.any():
        raise EmptyGrid(f"no interior node for h={h} on {geometry}")
    lookup = np.full(inside.shape, -1, dtype=np.int64)
    lookup[inside] = np.arange(int(inside.sum()))
    return Grid(
        geometry=geometry,
        spec=spec,
        i=I[inside].astype(np.int64),
        j=J[inside].astype(np.int64),
        lookup=lookup,
        i0=int(i0),
        j0=int(j0),
    )
