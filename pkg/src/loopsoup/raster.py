"""Occupancy rasters: the discretization carrier for connectivity decisions.

A raster is a boolean grid over an axis-aligned rectangle.  Cell (i, j)
covers [x0 + i*cell, x0 + (i+1)*cell) x [y0 + j*cell, y0 + (j+1)*cell).
Occupied cells use 8-connectivity, free cells 4-connectivity (the standard
digital-topology duality, so a path and its complement never both cross a
diagonal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

__all__ = ["OccupancyRaster", "rasterize", "frontier"]


@dataclass
class OccupancyRaster:
    """Boolean occupancy grid over a rectangle.

    origin: (x, y) of the lower-left corner of cell (0, 0).
    cell: cell side in plane units.
    bits: 2-D boolean array indexed [i, j] = [x-index, y-index].
    """

    origin: tuple
    cell: float
    bits: np.ndarray

    @property
    def shape(self):
        return self.bits.shape

    def extent(self):
        """(x0, y0, x1, y1) rectangle covered by the raster."""
        nx, ny = self.bits.shape
        x0, y0 = self.origin
        return (x0, y0, x0 + nx * self.cell, y0 + ny * self.cell)

    def cell_index(self, x, y):
        """Grid indices of the cell containing (x, y) (may be out of range)."""
        i = int(np.floor((x - self.origin[0]) / self.cell))
        j = int(np.floor((y - self.origin[1]) / self.cell))
        return i, j

    def cell_center(self, i, j):
        x0, y0 = self.origin
        return (x0 + (i + 0.5) * self.cell, y0 + (j + 0.5) * self.cell)

    def copy(self):
        return OccupancyRaster(self.origin, self.cell, self.bits.copy())


def _bounds_of(polylines):
    lo = np.array([np.inf, np.inf])
    hi = np.array([-np.inf, -np.inf])
    for p in polylines:
        p = np.asarray(p, dtype=float)
        lo = np.minimum(lo, p.min(axis=0))
        hi = np.maximum(hi, p.max(axis=0))
    return lo, hi


def rasterize(polylines, cell, origin=None, shape=None):
    """Conservative supercover raster of a collection of polylines.

    Every cell intersected by any segment is set.  If origin/shape are not
    given, the grid is sized from the data with one cell of padding, so
    rasters of different inputs are unioned by rasterizing onto a common
    (origin, shape).
    """
    if cell <= 0:
        raise ValueError(f"cell must be positive, got {cell}")
    polylines = [np.asarray(p, dtype=float) for p in polylines]
    if origin is None or shape is None:
        if not polylines:
            return OccupancyRaster((0.0, 0.0), cell, np.zeros((2, 2), dtype=bool))
        lo, hi = _bounds_of(polylines)
        origin = (lo[0] - cell, lo[1] - cell)
        shape = (
            int(np.ceil((hi[0] - origin[0]) / cell)) + 2,
            int(np.ceil((hi[1] - origin[1]) / cell)) + 2,
        )
    ngx, ngy = shape
    grid = np.zeros(ngx * ngy, dtype=np.uint8)
    inv_h = 1.0 / cell
    for p in polylines:
        _k.mark_polyline(
            np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
            grid, origin[0], origin[1], inv_h, ngx, ngy)
    return OccupancyRaster(tuple(origin), cell, grid.reshape(ngx, ngy).astype(bool))


def exterior_mask(raster):
    """Boolean mask of free cells 4-connected to the raster frame."""
    ngx, ngy = raster.bits.shape
    grid = np.ascontiguousarray(raster.bits.reshape(-1).astype(np.uint8))
    reach = np.zeros(ngx * ngy, dtype=np.uint8)
    stack = np.empty(ngx * ngy, dtype=np.int32)
    _k.exterior_reachable(grid, reach, stack, ngx, ngy)
    return reach.reshape(ngx, ngy).astype(bool)


def frontier(raster):
    """Occupied cells 8-adjacent to the exterior free component.

    The raster analogue of the outer boundary of an occupied set: flood
    fill the free cells from the frame, then keep occupied cells touching
    that exterior component (8-connectivity).  Returns a boolean mask of
    the raster's shape.
    """
    ext = exterior_mask(raster)
    # dilate the exterior by one cell in all 8 directions
    near = np.zeros_like(ext)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            src = ext[
                max(0, -dx):ext.shape[0] - max(0, dx),
                max(0, -dy):ext.shape[1] - max(0, dy),
            ]
            near[
                max(0, dx):near.shape[0] - max(0, -dx),
                max(0, dy):near.shape[1] - max(0, -dy),
            ] |= src
    return raster.bits & near
