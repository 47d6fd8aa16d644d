"""Disconnection decisions: flood fill vs exact planar oracle, arcs,
landing-zone separation predicate."""

import math

import numpy as np
import pytest
from shapely.geometry import LineString, Point, box
from shapely.ops import unary_union

from loopsoup.connectivity import (AnnulusScene, DegenerateSceneError,
                                   alpha_sep_predicate, disconnects,
                                   free_segment_on_circle)
from loopsoup.paths import SoupConfig, sample_loop_soup, stream_rng
from loopsoup.raster import OccupancyRaster, rasterize

S, R = 0.0, 1.5
FRAME = math.exp(R + 0.2)
GRID = 512
CELL = 2.0 * FRAME / GRID


def _scene(segments, margin=0.2, grid=GRID):
    frame = math.exp(R + margin)
    cell = 2.0 * frame / grid
    ras = rasterize(segments, cell, origin=(-frame, -frame),
                    shape=(grid, grid))
    return AnnulusScene(ras, S, R)


def _planar_disconnects(segments, eps):
    """Continuum oracle: the origin lies in a bounded face of the
    complement of the (eps-thickened) segment union."""
    union = unary_union([LineString(s).buffer(eps) for s in segments])
    world = box(-FRAME, -FRAME, FRAME, FRAME)
    comp = world.difference(union)
    parts = getattr(comp, "geoms", [comp])
    for poly in parts:
        if poly.contains(Point(0.0, 0.0)):
            # bounded face iff it stays away from the world frame
            return poly.exterior.distance(world.exterior) > eps
    return True  # origin swallowed by the obstacle: disconnected


def _ngon_scenes():
    """50 constructed scenes of <= 6 segments: closed rings around the
    origin (disconnecting) and the same rings with one edge removed
    (not disconnecting), over shapes and rotations."""
    scenes = []
    i = 0
    while len(scenes) < 50:
        n = 3 + i % 4  # 3..6 vertices
        rot = 0.37 * i
        # keep the ring's incircle outside C_s (radius 1): the triangle
        # case needs circumradius > 1 / cos(pi/3) = 2
        rad = 2.2 + 0.12 * (i % 5)
        th = rot + 2.0 * math.pi * np.arange(n + 1) / n
        pts = np.column_stack([rad * np.cos(th), rad * np.sin(th)])
        closed = [pts[j:j + 2] for j in range(n)]
        scenes.append((closed, True))
        if len(scenes) < 50:
            scenes.append((closed[:-1], False))  # one edge missing
        i += 1
    return scenes


def test_empty_scene_connected():
    bits = np.zeros((GRID, GRID), dtype=bool)
    scene = AnnulusScene(OccupancyRaster((-FRAME, -FRAME), CELL, bits), S, R)
    assert not disconnects(scene)


def test_occupied_ring_disconnects():
    bits = np.zeros((GRID, GRID), dtype=bool)
    cx = (np.arange(GRID) + 0.5) * CELL - FRAME
    d = np.hypot(cx[:, None], cx[None, :])
    bits[(d > 2.0) & (d < 2.5)] = True
    scene = AnnulusScene(OccupancyRaster((-FRAME, -FRAME), CELL, bits), S, R)
    assert disconnects(scene)


def test_degenerate_scene_raises():
    bits = np.zeros((GRID, GRID), dtype=bool)
    cx = (np.arange(GRID) + 0.5) * CELL - FRAME
    d = np.hypot(cx[:, None], cx[None, :])
    bits[d < 1.5] = True  # swallow C_s entirely
    scene = AnnulusScene(OccupancyRaster((-FRAME, -FRAME), CELL, bits), S, R)
    with pytest.raises(DegenerateSceneError):
        disconnects(scene)


def test_agrees_with_exact_planar_oracle():
    for segments, expected in _ngon_scenes():
        assert _planar_disconnects(segments, eps=CELL / 4) == expected
        assert disconnects(_scene(segments)) == expected


def test_monotone_under_obstacle_addition():
    rng = np.random.default_rng(3)
    for segments, _ in _ngon_scenes()[:20]:
        scene = _scene(segments)
        before = disconnects(scene)
        bits = scene.raster.bits.copy()
        ii = rng.integers(0, GRID, size=200)
        jj = rng.integers(0, GRID, size=200)
        bits[ii, jj] = True
        grown = AnnulusScene(
            OccupancyRaster(scene.raster.origin, scene.raster.cell, bits),
            S, R)
        try:
            after = disconnects(grown)
        except DegenerateSceneError:
            after = True
        if before:
            assert after


def test_frame_radius_insensitivity():
    for segments, expected in _ngon_scenes()[:20]:
        v1 = disconnects(_scene(segments, margin=0.2))
        v2 = disconnects(_scene(segments, margin=0.4, grid=768))
        assert v1 == v2 == expected


def test_free_arcs_full_circle():
    bits = np.zeros((GRID, GRID), dtype=bool)
    scene = AnnulusScene(OccupancyRaster((-FRAME, -FRAME), CELL, bits), S, R)
    arcs = free_segment_on_circle(scene, 1.0)
    assert len(arcs) == 1
    assert abs((arcs[0][1] - arcs[0][0]) - 2.0 * math.pi) < 1e-9


def test_free_arcs_two_opposite_wedges():
    rho = math.exp(1.0)
    cx = (np.arange(GRID) + 0.5) * CELL - FRAME
    d = np.hypot(cx[:, None], cx[None, :])
    ang = np.arctan2(cx[None, :], cx[:, None])
    band = (d > 0.9 * rho) & (d < 1.1 * rho)
    in_wedge = (np.abs((np.abs(ang) - 0.0)) <= 0.3) | (np.abs(ang) >= math.pi - 0.3)
    bits = band & in_wedge
    scene = AnnulusScene(OccupancyRaster((-FRAME, -FRAME), CELL, bits), S, R)
    arcs = free_segment_on_circle(scene, 1.0)
    assert len(arcs) == 2
    free_measure = sum(b - a for a, b in arcs)
    cell_half = math.atan2(CELL * math.sqrt(0.5), rho)
    expected = 2.0 * math.pi - 4 * 0.3
    assert abs(free_measure - expected) < 40 * cell_half


def test_free_arcs_partition_measure():
    segments, _ = _ngon_scenes()[0]
    scene = _scene(segments)
    u = math.log(1.8)  # circle through the obstacle ring
    arcs = free_segment_on_circle(scene, u)
    free_measure = sum(b - a for a, b in arcs)
    assert 0.0 <= free_measure <= 2.0 * math.pi + 0.2


def test_alpha_sep_radial_crossing_true():
    r = 1.5
    tr = np.column_stack([np.linspace(1.0, math.exp(r), 400),
                          np.zeros(400)])
    ras = rasterize([tr], CELL, origin=(-FRAME, -FRAME), shape=(GRID, GRID))
    assert alpha_sep_predicate([tr], None, 0.0, r, 0.1, scene_raster=ras)


def test_alpha_sep_close_landings_false():
    r = 1.5
    alpha = 0.1
    rr = math.exp(r)
    # two radial crossings whose endpoints on C_r are closer than sqrt(alpha)*e^r
    dth = 0.5 * math.sqrt(alpha)  # angular gap, chord < sqrt(alpha) e^r
    tr1 = np.column_stack([np.linspace(1.0, rr, 400), np.zeros(400)])
    radii = np.linspace(1.0, rr, 400)
    tr2 = np.column_stack([radii * math.cos(dth), radii * math.sin(dth)])
    ras = rasterize([tr1, tr2], CELL, origin=(-FRAME, -FRAME),
                    shape=(GRID, GRID))
    assert not alpha_sep_predicate([tr1, tr2], None, 0.0, r, alpha,
                                   scene_raster=ras)


def test_alpha_sep_unconfined_false():
    r = 1.5
    rr = math.exp(r)
    # crossing that slides along C_s far outside its landing wedge
    th = np.linspace(0.0, 1.0, 200)
    hug = np.column_stack([1.02 * np.cos(th), 1.02 * np.sin(th)])
    out = np.column_stack([np.linspace(1.02, rr, 200) * math.cos(1.0),
                           np.linspace(1.02, rr, 200) * math.sin(1.0)])
    tr = np.vstack([[[1.0, 0.0]], hug, out])
    ras = rasterize([tr], CELL, origin=(-FRAME, -FRAME), shape=(GRID, GRID))
    assert not alpha_sep_predicate([tr], None, 0.0, r, 0.1, scene_raster=ras)


def test_alpha_sep_validation():
    tr = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        alpha_sep_predicate([tr], None, 0.0, 0.5, 0.1)  # r - s <= 1
    with pytest.raises(ValueError):
        alpha_sep_predicate([tr], None, 0.0, 2.0, 0.7)  # alpha out of range
