"""Uniform discretization of the belief simplex.

Grid points are all probability vectors whose coordinates are integer
multiples of 1/m.  Enumeration order is ascending lexicographic in the
integer coordinate vector, which is what every tie-break and serialization
downstream relies on.
"""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_CAP = 2_000_000


class ResourceLimit(RuntimeError):
    """Requested grid would exceed the configured point cap."""


@dataclass
class SimplexGrid:
    nx: int
    m: int
    coords: np.ndarray   # (n, nx) integer coordinates summing to m
    points: np.ndarray   # (n, nx) coords / m

    def __len__(self):
        return self.coords.shape[0]

    def __post_init__(self):
        self._index = {tuple(c): i for i, c in enumerate(self.coords.tolist())}

    def index_of(self, coord) -> int:
        return self._index[tuple(int(c) for c in coord)]


def size(nx: int, m: int) -> int:
    return math.comb(m + nx - 1, nx - 1)


def build(nx: int, m: int, cap: int = DEFAULT_CAP) -> SimplexGrid:
    if nx < 1 or m < 1:
        raise ValueError("need nx >= 1 and m >= 1")
    n = size(nx, m)
    if n > cap:
        raise ResourceLimit(f"grid would have {n} points, cap is {cap}")
    coords = np.empty((n, nx), dtype=np.int64)
    work = np.zeros(nx, dtype=np.int64)

    pos = 0

    def rec(axis, remaining):
        nonlocal pos
        if axis == nx - 1:
            work[axis] = remaining
            coords[pos] = work
            pos += 1
            return
        for k in range(remaining + 1):
            work[axis] = k
            rec(axis + 1, remaining - k)

    rec(0, m)
    points = coords.astype(float) / m
    points.setflags(write=False)
    coords.setflags(write=False)
    return SimplexGrid(nx, m, coords, points)


def project(grid: SimplexGrid, psi) -> int:
    """Index of the L1-nearest grid point; ties break to the lowest index."""
    p = psi.probs if hasattr(psi, "probs") else np.asarray(psi, dtype=float)
    return int(np.argmin(np.abs(grid.points - p).sum(axis=1)))


def project_many(grid: SimplexGrid, beliefs: np.ndarray) -> np.ndarray:
    """Vectorized projection of a (k, nx) batch of beliefs."""
    d = np.abs(beliefs[:, None, :] - grid.points[None, :, :]).sum(axis=2)
    return np.argmin(d, axis=1)
