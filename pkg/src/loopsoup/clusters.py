"""Connectivity clusters of loop collections.

Two loops are in the same cluster iff they are linked by a finite chain of
pairwise-intersecting loops.  Intersection is decided at raster resolution:
loops intersect iff their supercover rasters share a cell.  Brownian traces
discretized at time step dt have effective thickness ~sqrt(dt), so with
cell ~ sqrt(dt) raster contact is the faithful notion; an exact
segment-intersection predicate is available behind a flag for
cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .raster import OccupancyRaster, rasterize

__all__ = ["Cluster", "ClusterSet", "build_clusters", "attach_clusters",
           "brute_force_partition"]


@dataclass
class Cluster:
    members: list  # loop indices
    bbox: tuple  # (x0, y0, x1, y1)
    diameter: float  # bbox diagonal (documented upper bound)
    cells: np.ndarray  # flat raster cell indices on the shared grid


@dataclass
class ClusterSet:
    loop_count: int
    parent: np.ndarray  # union-find roots, shape (loop_count,)
    clusters: list  # of Cluster
    origin: tuple
    cell: float
    shape: tuple  # shared grid (ngx, ngy)

    def cluster_raster(self, idx):
        """OccupancyRaster of one cluster on the shared grid."""
        bits = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        bits[self.clusters[idx].cells] = True
        return OccupancyRaster(self.origin, self.cell,
                               bits.reshape(self.shape))


def _grid_geometry(traces, cell, pad=2):
    lo = np.array([np.inf, np.inf])
    hi = np.array([-np.inf, -np.inf])
    for t in traces:
        lo = np.minimum(lo, t.min(axis=0))
        hi = np.maximum(hi, t.max(axis=0))
    # snap the origin to the lattice cell*Z^2 so grids at cell and cell/2
    # nest exactly (contact can then only refine, never coarsen)
    origin = (math.floor(lo[0] / cell - pad) * cell,
              math.floor(lo[1] / cell - pad) * cell)
    shape = (int(np.ceil((hi[0] - origin[0]) / cell)) + 1 + pad,
             int(np.ceil((hi[1] - origin[1]) / cell)) + 1 + pad)
    return origin, shape


def _loop_cells(traces, cell, origin, shape):
    """Distinct supercover cells of each trace on the shared grid."""
    ngx, ngy = shape
    stamps = np.zeros(ngx * ngy, dtype=np.uint32)
    cells = []
    cap = 1024
    for i, t in enumerate(traces):
        stamp = np.uint32(i + 1)
        while True:
            out = np.empty(cap, dtype=np.int64)
            cnt = _k.collect_polyline_cells(
                np.ascontiguousarray(t[:, 0]), np.ascontiguousarray(t[:, 1]),
                origin[0], origin[1], 1.0 / cell, ngx, ngy,
                stamps, stamp, out)
            if cnt >= 0:
                cells.append(out[:cnt].copy())
                break
            cap *= 4
    return cells


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _segments_intersect(p1, p2, p3, p4):
    d1 = _cross2(p4 - p3, p1 - p3)
    d2 = _cross2(p4 - p3, p2 - p3)
    d3 = _cross2(p2 - p1, p3 - p1)
    d4 = _cross2(p2 - p1, p4 - p1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def _traces_intersect_exact(a, b):
    # bbox prefilter then O(n*m) segment tests; only used at test scale
    if (a.min(0) > b.max(0)).any() or (b.min(0) > a.max(0)).any():
        return False
    for i in range(len(a) - 1):
        for j in range(len(b) - 1):
            if _segments_intersect(a[i], a[i + 1], b[j], b[j + 1]):
                return True
    return False


def build_clusters(loops, cell, exact=False):
    """Partition loops into raster-contact clusters.

    Spatial hash (the shared grid itself) proposes candidate pairs; a
    union-find merges them.  With ``exact`` the raster contact for each
    candidate pair is confirmed by exact segment intersection before
    merging (slow; for cross-validation only).
    """
    if cell <= 0:
        raise ValueError(f"cell must be positive, got {cell}")
    n = len(loops)
    traces = [np.asarray(lp.trace, dtype=float) for lp in loops]
    if n == 0:
        return ClusterSet(0, np.zeros(0, dtype=np.int64), [], (0.0, 0.0),
                          cell, (0, 0))
    origin, shape = _grid_geometry(traces, cell)
    cells = _loop_cells(traces, cell, origin, shape)
    parent = np.arange(n, dtype=np.int64)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    pending = {}  # candidate pairs when exact confirmation requested
    for i in range(n):
        for c in cells[i]:
            j = owner.setdefault(int(c), i)
            if j != i:
                if exact:
                    pending[(min(i, j), max(i, j))] = True
                else:
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[max(ri, rj)] = min(ri, rj)
    if exact:
        for (i, j) in pending:
            if _traces_intersect_exact(traces[i], traces[j]):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    clusters = []
    for root in np.unique(roots):
        members = np.nonzero(roots == root)[0].tolist()
        pts = np.vstack([traces[m] for m in members])
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        ccells = np.unique(np.concatenate([cells[m] for m in members]))
        clusters.append(Cluster(members=members,
                                bbox=(lo[0], lo[1], hi[0], hi[1]),
                                diameter=math.hypot(hi[0] - lo[0],
                                                    hi[1] - lo[1]),
                                cells=ccells))
    return ClusterSet(loop_count=n, parent=roots, clusters=clusters,
                      origin=origin, cell=cell, shape=shape)


def attach_clusters(seed_polylines, cluster_set: ClusterSet):
    """Union of the seed raster with every cluster raster it touches.

    One hop over clusters suffices because clusters are transitively
    closed.  Idempotent and monotone in the cluster set.  Returns an
    OccupancyRaster on the cluster set's shared grid (enlarged if the
    seeds overflow it).
    """
    origin, shape, cell = cluster_set.origin, cluster_set.shape, cluster_set.cell
    seeds = [np.asarray(p, dtype=float) for p in seed_polylines]
    if seeds and shape != (0, 0):
        lo = np.minimum.reduce([s.min(axis=0) for s in seeds])
        hi = np.maximum.reduce([s.max(axis=0) for s in seeds])
        if (lo[0] < origin[0] or lo[1] < origin[1]
                or hi[0] > origin[0] + shape[0] * cell
                or hi[1] > origin[1] + shape[1] * cell):
            raise ValueError("seed polylines overflow the cluster grid; "
                             "build clusters over a region covering the seeds")
    if shape == (0, 0):
        return rasterize(seeds, cell)
    seed_raster = rasterize(seeds, cell, origin=origin, shape=shape)
    bits = seed_raster.bits.reshape(-1)
    seed_cells = np.nonzero(bits)[0]
    seed_set = set(seed_cells.tolist())
    out = bits.copy()
    for cl in cluster_set.clusters:
        touches = any(int(c) in seed_set for c in cl.cells)
        if touches:
            out[cl.cells] = True
    return OccupancyRaster(origin, cell, out.reshape(shape))


def brute_force_partition(loops, cell):
    """O(n^2) pairwise raster-intersection + transitive closure.

    Test oracle for build_clusters on small inputs: returns the partition
    as a sorted list of sorted member lists.
    """
    n = len(loops)
    traces = [np.asarray(lp.trace, dtype=float) for lp in loops]
    if n == 0:
        return []
    origin, shape = _grid_geometry(traces, cell)
    cells = [set(c.tolist()) for c in _loop_cells(traces, cell, origin, shape)]
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        adj[i, i] = True
        for j in range(i + 1, n):
            if cells[i] & cells[j]:
                adj[i, j] = adj[j, i] = True
    # Floyd-Warshall-style closure
    for k in range(n):
        adj |= adj[:, k:k + 1] & adj[k:k + 1, :]
    seen = set()
    partition = []
    for i in range(n):
        if i in seen:
            continue
        comp = sorted(np.nonzero(adj[i])[0].tolist())
        seen.update(comp)
        partition.append(comp)
    return sorted(partition)
