"""Disconnection decisions on annulus scenes.

A scene is an obstacle raster between two concentric circles C_s and C_r;
"infinity" is proxied by the raster frame, which must sit at radius at
least e^{r+0.2} (obstacles live inside B_r, so a free path to the frame
always extends to infinity).  Free cells connect with 4-adjacency,
obstacles block with 8-adjacency, per the digital-topology duality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import OccupancyRaster, exterior_mask

__all__ = ["AnnulusScene", "DegenerateSceneError", "disconnects",
           "free_segment_on_circle", "alpha_sep_predicate", "wedge_polygon"]

TWO_PI = 2.0 * math.pi


class DegenerateSceneError(RuntimeError):
    """Raised when every cell meeting the inner circle is occupied."""


@dataclass
class AnnulusScene:
    """Obstacle raster plus the two log-radii of the annulus.

    The scene is valid when the raster frame strictly contains C_r with
    margin (>= e^{r+0.2} in every direction from the center).
    """

    raster: OccupancyRaster
    s: float
    r: float
    center: tuple = (0.0, 0.0)

    def validate(self):
        x0, y0, x1, y1 = self.raster.extent()
        cx, cy = self.center
        margin = min(cx - x0, x1 - cx, cy - y0, y1 - cy)
        need = math.exp(self.r + 0.2)
        if margin < need * (1 - 1e-9):
            raise ValueError(
                f"raster frame at distance {margin:.4g} from center; "
                f"needs >= e^(r+0.2) = {need:.4g}")
        if not self.r > self.s:
            raise ValueError(f"need r > s, got s={self.s}, r={self.r}")


def circle_cell_mask(raster, center, rho):
    """Mask of cells whose square intersects the circle of radius rho."""
    nx, ny = raster.bits.shape
    x0, y0 = raster.origin
    h = raster.cell
    cx = x0 + (np.arange(nx) + 0.5) * h - center[0]
    cy = y0 + (np.arange(ny) + 0.5) * h - center[1]
    d = np.hypot(cx[:, None], cy[None, :])
    half_diag = h * math.sqrt(0.5)
    return np.abs(d - rho) <= half_diag


def disconnects(scene: AnnulusScene):
    """Does the obstacle set cut the inner circle off from infinity?

    True iff no 4-connected free-cell path joins a free cell adjacent to
    C_s to the raster frame.  Implemented as a single flood fill from the
    frame inward.  Raises DegenerateSceneError when every cell meeting
    C_s is occupied (the inner circle itself is swallowed at raster
    resolution).
    """
    scene.validate()
    src = circle_cell_mask(scene.raster, scene.center, math.exp(scene.s))
    free_src = src & ~scene.raster.bits
    if not free_src.any():
        raise DegenerateSceneError(
            "all cells meeting the inner circle are occupied")
    ext = exterior_mask(scene.raster)
    return not bool((free_src & ext).any())


def free_segment_on_circle(scene: AnnulusScene, u):
    """Maximal free angular arcs of the circle C_u.

    Walks the cells met by the circle of radius e^u in angular order and
    merges consecutive free cells into arcs.  Returns a list of
    (theta_start, theta_end) with theta_end > theta_start, in [0, 4 pi);
    a fully free circle gives [(0, 2 pi)].
    """
    if not (scene.s <= u <= scene.r):
        raise ValueError(f"u={u} outside [s, r]=[{scene.s}, {scene.r}]")
    rho = math.exp(u)
    mask = circle_cell_mask(scene.raster, scene.center, rho)
    ii, jj = np.nonzero(mask)
    if ii.size == 0:
        return []
    x0, y0 = scene.raster.origin
    h = scene.raster.cell
    ang = np.arctan2(y0 + (jj + 0.5) * h - scene.center[1],
                     x0 + (ii + 0.5) * h - scene.center[0]) % TWO_PI
    order = np.argsort(ang)
    ang = ang[order]
    free = ~scene.raster.bits[ii[order], jj[order]]
    if free.all():
        return [(0.0, TWO_PI)]
    if not free.any():
        return []
    # angular half-width subtended by one cell at this radius
    half = math.atan2(h * math.sqrt(0.5), rho)
    # rotate so the walk starts at an occupied cell, then collect runs
    occ = np.nonzero(~free)[0]
    k0 = occ[0]
    idx = np.concatenate([np.arange(k0, len(ang)), np.arange(0, k0)])
    arcs = []
    run_start = None
    prev_ang = None
    for pos, t in enumerate(idx):
        a = ang[t] + (TWO_PI if pos >= len(ang) - k0 else 0.0)
        if free[t]:
            if run_start is None:
                run_start = a - half
            prev_ang = a + half
        else:
            if run_start is not None:
                arcs.append((run_start, prev_ang))
                run_start = None
    if run_start is not None:
        arcs.append((run_start, prev_ang))
    return arcs


def wedge_polygon(theta_c, arc_halfwidth, u_lo, u_hi, npts=16):
    """Polyline outlining the annular-sector landing wedge.

    The wedge {u z : e^{u_lo - u_c} <=, ...} around a landing point at
    angle theta_c: radii in [e^{u_lo}, e^{u_hi}], angles within
    arc_halfwidth of theta_c.  Returned as a closed polyline suitable for
    rasterization.
    """
    th = np.linspace(theta_c - arc_halfwidth, theta_c + arc_halfwidth, npts)
    r0, r1 = math.exp(u_lo), math.exp(u_hi)
    inner = np.column_stack([r0 * np.cos(th), r0 * np.sin(th)])
    outer = np.column_stack([r1 * np.cos(th[::-1]), r1 * np.sin(th[::-1])])
    return np.vstack([inner, outer, inner[:1]])


def _fill_wedge_cells(bits, origin, cell, theta_c, arc_halfwidth, u_lo, u_hi,
                      center):
    """Set all cells whose center lies in the wedge (solid fill)."""
    nx, ny = bits.shape
    x0, y0 = origin
    cx = x0 + (np.arange(nx) + 0.5) * cell - center[0]
    cy = y0 + (np.arange(ny) + 0.5) * cell - center[1]
    d = np.hypot(cx[:, None], cy[None, :])
    ang = np.arctan2(cy[None, :], cx[:, None])
    dth = (ang - theta_c + math.pi) % TWO_PI - math.pi
    sel = ((d >= math.exp(u_lo)) & (d <= math.exp(u_hi))
           & (np.abs(dth) <= arc_halfwidth))
    bits |= sel
    return bits


def _pairwise_arc_ok(points, min_dist, arc_half_chord):
    """Condition (i): cyclic neighbors' landing arcs at least min_dist
    apart.  Arc separation is bounded below by point distance minus the
    two arc half-lengths (chord bound, conservative)."""
    k = len(points)
    if k == 1:
        return True
    for i in range(k):
        p = points[i]
        q = points[(i + 1) % k]
        d = math.hypot(p[0] - q[0], p[1] - q[1]) - 2.0 * arc_half_chord
        if d < min_dist:
            return False
    return True


def alpha_sep_predicate(traces, attached_rasters, s, r, alpha,
                        cluster_set=None, scene_raster=None):
    """Evaluate the landing-zone separation event on rasters.

    ``traces``: k crossing traces (arrays), each from C_s to C_r.
    ``attached_rasters``: per-trace OccupancyRaster of the trace union its
    attached clusters (on a common grid), or None when there are no
    clusters — the confinement condition is then evaluated exactly on the
    trace vertices instead of on raster cells (cells near the inner
    circle can be coarser than the landing wedge itself, so the raster
    route is only meaningful when clusters force it).  ``cluster_set``:
    the soup's ClusterSet (may be None when the soup is empty) used for
    the cluster-diameter condition.  ``scene_raster``: optional
    precomputed union raster for the disconnection condition; rebuilt
    from ``attached_rasters`` if None (required when both are None).

    Conditions: (i) consecutive landing arcs (length alpha e^s on C_s,
    alpha e^r on C_r, centered at the trace endpoints) at distance >=
    sqrt(alpha) e^s / sqrt(alpha) e^r; (ii) each trace-with-clusters
    confined to A(s+alpha, r-alpha) union its two wedges; (iii) clusters
    meeting A(s, s+alpha) / A(r-alpha, r) have diameter < alpha e^s/100 /
    alpha e^r/100; (iv) the union of all traces, clusters and wedges does
    not disconnect C_s from infinity.
    """
    if not (r - s > 1):
        raise ValueError(f"need r - s > 1, got s={s}, r={r}")
    if not (0 < alpha < 0.5):
        raise ValueError(f"alpha must be in (0, 1/2), got {alpha}")
    k = len(traces)
    rs, rr = math.exp(s), math.exp(r)
    starts = [np.asarray(t)[0] for t in traces]
    ends = [np.asarray(t)[-1] for t in traces]

    # (i) landing arcs well-separated (cyclic)
    if not _pairwise_arc_ok(starts, math.sqrt(alpha) * rs, alpha * rs / 2):
        return False
    if not _pairwise_arc_ok(ends, math.sqrt(alpha) * rr, alpha * rr / 2):
        return False

    # wedge geometry: arc of length alpha e^u subtends half-angle alpha/2
    theta_s = [math.atan2(p[1], p[0]) for p in starts]
    theta_r = [math.atan2(p[1], p[0]) for p in ends]

    # (ii) confinement of each attached crossing
    for i in range(k):
        if attached_rasters is None:
            tr = np.asarray(traces[i])
            x, y = tr[:, 0], tr[:, 1]
            tol = 0.0
        else:
            ras = attached_rasters[i]
            ii, jj = np.nonzero(ras.bits)
            if ii.size == 0:
                continue
            x = ras.origin[0] + (ii + 0.5) * ras.cell
            y = ras.origin[1] + (jj + 0.5) * ras.cell
            tol = ras.cell * math.sqrt(0.5)
        d = np.hypot(x, y)
        inside = (d >= rs * math.exp(alpha) - tol) & (d <= rr * math.exp(-alpha) + tol)
        bad = ~inside
        if bad.any():
            ang = np.arctan2(y[bad], x[bad])
            db = d[bad]
            dth_s = (ang - theta_s[i] + math.pi) % TWO_PI - math.pi
            in_ws = ((db >= rs * math.exp(-alpha) - tol)
                     & (db <= rs * math.exp(alpha) + tol)
                     & (np.abs(dth_s) <= alpha / 2 + tol / rs))
            dth_r = (ang - theta_r[i] + math.pi) % TWO_PI - math.pi
            in_wr = ((db >= rr * math.exp(-alpha) - tol)
                     & (db <= rr * math.exp(alpha) + tol)
                     & (np.abs(dth_r) <= alpha / 2 + tol / rr))
            if not (in_ws | in_wr).all():
                return False

    # (iii) clusters near the circles are small
    if cluster_set is not None:
        for cl in cluster_set.clusters:
            x0, y0, x1, y1 = cl.bbox
            corners = np.array([[x0, y0], [x0, y1], [x1, y0], [x1, y1]])
            dmin = max(0.0, np.hypot(corners[:, 0], corners[:, 1]).min()
                       if not (x0 <= 0 <= x1 and y0 <= 0 <= y1) else 0.0)
            dmax = np.hypot(corners[:, 0], corners[:, 1]).max()
            if dmax >= rs and dmin <= rs * math.exp(alpha):
                if cl.diameter >= alpha * rs / 100:
                    return False
            if dmax >= rr * math.exp(-alpha) and dmin <= rr:
                if cl.diameter >= alpha * rr / 100:
                    return False

    # (iv) union with wedges does not disconnect C_s
    if scene_raster is None:
        if attached_rasters is None:
            raise ValueError(
                "need scene_raster when attached_rasters is None")
        base = attached_rasters[0]
        bits = np.zeros_like(base.bits)
        for ras in attached_rasters:
            bits |= ras.bits
        scene_raster = OccupancyRaster(base.origin, base.cell, bits)
    bits = scene_raster.bits.copy()
    for i in range(k):
        _fill_wedge_cells(bits, scene_raster.origin, scene_raster.cell,
                          theta_s[i], alpha / 2, s - alpha, s + alpha,
                          (0.0, 0.0))
        _fill_wedge_cells(bits, scene_raster.origin, scene_raster.cell,
                          theta_r[i], alpha / 2, r - alpha, r + alpha,
                          (0.0, 0.0))
    scene = AnnulusScene(
        OccupancyRaster(scene_raster.origin, scene_raster.cell, bits), s, r)
    try:
        if disconnects(scene):
            return False
    except DegenerateSceneError:
        return False
    return True
