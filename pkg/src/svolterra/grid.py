"""Time discretisations, the left-endpoint map and the mesh."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, OutOfRange


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing times ``0 = t_0 < ... < t_n = T``."""

    points: np.ndarray
    uniform: bool = field(default=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgument("a grid needs at least two points")
        if pts[0] != 0.0:
            raise InvalidArgument("grid must start at 0")
        if not np.all(np.diff(pts) > 0):
            raise InvalidArgument("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.points.size - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self):
        return self.points.size

    def __repr__(self):
        kind = "uniform" if self.uniform else "grid"
        return f"TimeGrid({kind}, n={self.n}, T={self.T:g})"


def uniform_grid(T: float, n: int) -> TimeGrid:
    if not (T > 0):
        raise InvalidArgument(f"horizon must be positive, got {T}")
    if int(n) != n or n < 1:
        raise InvalidArgument(f"n must be a positive integer, got {n}")
    n = int(n)
    pts = np.arange(n + 1) * (T / n)
    pts[-1] = T
    return TimeGrid(pts, uniform=True)


def eta(grid: TimeGrid, s: float) -> tuple[int, float]:
    """Index and value of the largest grid point ``<= s``.

    ``s = T`` maps to the terminal point (index ``n``).
    """
    pts = grid.points
    if s < 0 or s > pts[-1]:
        raise OutOfRange(f"time {s} outside [0, {pts[-1]}]")
    k = int(np.searchsorted(pts, s, side="right")) - 1
    return k, float(pts[k])


def mesh(grid: TimeGrid) -> float:
    return float(np.max(np.diff(grid.points)))
