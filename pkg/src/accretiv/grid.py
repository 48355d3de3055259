"""Uniform cell-centred rectangular grids.

Nodes sit at cell centres, ``x_i = lower + (i + 1/2) h``, so a box that is
symmetric about the origin with an even number of points never places a node
at 0.  Two boundary modes are supported:

``zero``
    zero extension: grid functions are implicitly 0 on the ghost layer just
    outside the box (test functions with compact support).
``periodic``
    the box is a torus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

BOUNDARY_MODES = ("zero", "periodic")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]
    boundary: str = "zero"

    def __post_init__(self):
        n = len(self.points)
        if not 1 <= n <= 3:
            raise GridError(f"dimension must be 1, 2 or 3, got {n}")
        if len(self.lower) != n or len(self.upper) != n:
            raise GridError("lower/upper/points must have the same length")
        if any(p < 4 for p in self.points):
            raise GridError(f"need at least 4 points per axis, got {self.points}")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise GridError("box extents must be strictly positive")
        if self.boundary not in BOUNDARY_MODES:
            raise GridError(f"boundary must be one of {BOUNDARY_MODES}")
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "points", tuple(int(v) for v in self.points))

    @classmethod
    def box(cls, extents: Sequence[float], points: Sequence[int] | int,
            boundary: str = "zero", centered: bool = True) -> "GridSpec":
        """Box of the given side lengths, centred at the origin by default."""
        extents = tuple(float(e) for e in extents)
        if isinstance(points, (int, np.integer)):
            points = (int(points),) * len(extents)
        if centered:
            lower = tuple(-e / 2 for e in extents)
        else:
            lower = (0.0,) * len(extents)
        upper = tuple(lo + e for lo, e in zip(lower, extents))
        return cls(lower, upper, tuple(points), boundary)

    @classmethod
    def interval(cls, lo: float, hi: float, points: int, boundary: str = "zero") -> "GridSpec":
        return cls((lo,), (hi,), (points,), boundary)

    @property
    def ndim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / p for e, p in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def axis_nodes(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + (np.arange(self.points[axis]) + 0.5) * h

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        return np.meshgrid(*(self.axis_nodes(k) for k in range(self.ndim)), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(x ** 2 for x in self.coords()))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        """Shape of the staggered face array normal to ``axis``.

        Zero extension keeps both boundary faces (N+1 faces); periodic grids
        have N faces, face i sitting between node i and node i+1.
        """
        shape = list(self.points)
        if not self.periodic:
            shape[axis] += 1
        return tuple(shape)

    def nearest_node(self, x: float, axis: int = 0) -> int:
        h = self.spacing[axis]
        i = int(np.floor((x - self.lower[axis]) / h))
        return int(np.clip(i, 0, self.points[axis] - 1))

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.lower, self.upper, tuple(p * factor for p in self.points), self.boundary)

    def with_boundary(self, boundary: str) -> "GridSpec":
        return GridSpec(self.lower, self.upper, self.points, boundary)

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper),
                "points": list(self.points), "boundary": self.boundary}
