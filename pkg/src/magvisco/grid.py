"""Node-centered tensor-product grids on boxes, with optional periodicity.

Extents count cells per axis; box mode stores extents+1 nodes per axis
(boundary nodes included), periodic mode stores extents nodes (no
duplicated seam). Quadrature is the trapezoidal rule in box mode and the
uniform rule in periodic mode. For fields that vanish on the boundary the
trapezoidal sum coincides exactly with the interior-only sum, so one
weight vector serves every field kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class GridError(ValueError):
    """Raised for inconsistent grid parameters."""


@dataclass(frozen=True)
class Grid:
    """Geometry and quadrature of a node-centered box grid."""

    dim: int
    extents: tuple[int, ...]
    box: tuple[tuple[float, float], ...]
    periodic: bool = False

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b[1] - b[0]) / n for b, n in zip(self.box, self.extents))

    @property
    def shape(self) -> tuple[int, ...]:
        if self.periodic:
            return self.extents
        return tuple(n + 1 for n in self.extents)

    @property
    def n_nodes(self) -> int:
        return math.prod(self.shape)

    @property
    def hinv(self) -> tuple[float, ...]:
        return tuple(1.0 / h for h in self.spacing)

    @property
    def hinv2(self) -> tuple[float, ...]:
        return tuple(1.0 / (h * h) for h in self.spacing)

    @property
    def interior(self) -> tuple[slice, ...]:
        """Slices selecting interior nodes (everything, when periodic)."""
        if self.periodic:
            return tuple(slice(None) for _ in range(self.dim))
        return tuple(slice(1, -1) for _ in range(self.dim))

    def axis_coords(self, a: int) -> np.ndarray:
        x0, x1 = self.box[a]
        if self.periodic:
            return x0 + self.spacing[a] * np.arange(self.extents[a])
        return np.linspace(x0, x1, self.extents[a] + 1)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid node coordinates, one array per axis (ij indexing)."""
        return tuple(np.meshgrid(*(self.axis_coords(a) for a in range(self.dim)), indexing="ij"))

    def quad_weights(self) -> np.ndarray:
        return _quad_weights(self)

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask of boundary nodes (all False when periodic)."""
        mask = np.ones(self.shape, dtype=bool)
        mask[self.interior] = False
        return mask


@lru_cache(maxsize=None)
def _quad_weights(grid: Grid) -> np.ndarray:
    cell = math.prod(grid.spacing)
    if grid.periodic:
        w = np.full(grid.shape, cell)
    else:
        w = np.full(grid.shape, cell)
        for a in range(grid.dim):
            edge = [slice(None)] * grid.dim
            for end in (0, -1):
                edge[a] = end
                w[tuple(edge)] *= 0.5
    w.setflags(write=False)
    return w


def make_grid(dim, extents, box=None, periodic=False) -> Grid:
    """Build a grid; ``extents`` is an int or per-axis sequence of cell counts."""
    if dim not in (2, 3):
        raise GridError(f"dim must be 2 or 3, got {dim}")
    if isinstance(extents, int):
        extents = (extents,) * dim
    extents = tuple(int(n) for n in extents)
    if len(extents) != dim:
        raise GridError(f"expected {dim} extents, got {len(extents)}")
    if any(n < 4 for n in extents):
        raise GridError(f"extents must be >= 4 cells per axis, got {extents}")
    if box is None:
        box = ((0.0, 1.0),) * dim
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != dim:
        raise GridError(f"expected {dim} box intervals, got {len(box)}")
    if any(hi <= lo for lo, hi in box):
        raise GridError(f"degenerate box {box}")
    return Grid(dim=dim, extents=extents, box=box, periodic=bool(periodic))
