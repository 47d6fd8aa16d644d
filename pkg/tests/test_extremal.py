"""Extremal-distance solver: analytic cases, monotonicity and composition
checks, Richardson honesty, excursion-pair functional."""

import math

import numpy as np
import pytest

from loopsoup.extremal import (GridDomain, annulus_domain,
                               check_comparison_principle,
                               check_composition_law, excursion_pair_extremal,
                               extremal_distance, rectangle_domain,
                               wedge_domain)


def test_rectangle_quick():
    for L in (1.0, 2.0):
        res = extremal_distance(rectangle_domain(L, ny=128))
        assert abs(res.value - L) / L < 0.02
        assert abs(res.value - math.pi / res.dirichlet_energy) < 1e-9


def test_wedge_quick():
    res = extremal_distance(wedge_domain(0.5, 0.0, 2.0, n=192))
    expected = math.pi * 2.0 / (2.0 * 0.5)
    assert abs(res.value - expected) / expected < 0.03


def test_annulus_quick():
    res = extremal_distance(annulus_domain(0.0, 2.0, n=192))
    assert abs(res.value - 1.0) < 0.03


def test_symmetry_swap_arcs():
    dom = wedge_domain(0.7, 0.0, 1.5, n=128)
    swapped = GridDomain(dom.free, dom.arc2, dom.arc1, dom.cell)
    a = extremal_distance(dom)
    b = extremal_distance(swapped)
    assert abs(a.value - b.value) < 1e-8 * max(1.0, a.value)


def test_scale_invariance_proxy():
    # doubling all lengths (cell included) leaves the value unchanged:
    # the discrete Laplace problem depends only on the grid topology
    dom = rectangle_domain(2.0, ny=96)
    doubled = GridDomain(dom.free, dom.arc1, dom.arc2, 2.0 * dom.cell)
    assert extremal_distance(dom).value == extremal_distance(doubled).value


def test_infinite_when_arcs_split():
    free = np.ones((40, 20), dtype=bool)
    free[20, :] = False  # full wall between the arcs
    a1 = np.zeros_like(free)
    a2 = np.zeros_like(free)
    a1[0, :] = True
    a2[-1, :] = True
    res = extremal_distance(GridDomain(free, a1, a2, cell=0.1))
    assert res.value == math.inf
    assert res.dirichlet_energy == 0.0
    assert math.exp(-0.5 * res.value) == 0.0  # tilt maps infinity to 0 exactly


def test_richardson_estimate_honest():
    for dom_c, exact in ((rectangle_domain(2.0, ny=64), 2.0),
                         (wedge_domain(0.5, 0.0, 2.0, n=128), 2.0 * math.pi)):
        vc = extremal_distance(dom_c, levels=2)
        vf = extremal_distance(dom_c.refined(), levels=2)
        assert abs(vc.value - vf.value) <= 4.0 * max(
            vf.richardson_error_estimate, 1e-6)
        # and the estimate brackets the truth up to a small multiple
        assert abs(vf.value - exact) <= 6.0 * max(
            vf.richardson_error_estimate, 0.01 * exact)


def _carved_rectangle(rng, ny=48):
    dom = rectangle_domain(1.5, ny=ny)
    free = dom.free.copy()
    nx = free.shape[0]
    for _ in range(rng.integers(1, 5)):
        i = rng.integers(2, nx - 2)
        j = rng.integers(2, ny - 2)
        di = int(rng.integers(1, 6))
        dj = int(rng.integers(1, 6))
        free[i:i + di, j:j + dj] = False
    free[0, :] = free[-1, :] = True  # keep the arcs intact
    return GridDomain(free, dom.arc1, dom.arc2, dom.cell), dom


def test_comparison_identity_and_strict():
    dom = rectangle_domain(2.0, ny=64)
    assert check_comparison_principle(dom, dom)
    base = rectangle_domain(2.0, ny=64)
    # same grid, 16 extra rows: blocked in the small domain, free in the big
    free_s = np.pad(base.free, ((0, 0), (0, 16)), constant_values=False)
    free_b = np.pad(base.free, ((0, 0), (0, 16)), constant_values=True)
    a1s = np.pad(base.arc1, ((0, 0), (0, 16)), constant_values=False)
    a2s = np.pad(base.arc2, ((0, 0), (0, 16)), constant_values=False)
    a1b = a1s.copy()
    a2b = a2s.copy()
    a1b[0, :] = True
    a2b[-1, :] = True
    small = GridDomain(free_s, a1s, a2s, base.cell)
    big = GridDomain(free_b, a1b, a2b, base.cell)
    assert check_comparison_principle(small, big)
    assert (extremal_distance(big).value
            < extremal_distance(small).value - 0.05)


def test_comparison_randomized():
    rng = np.random.default_rng(7)
    for _ in range(20):
        carved, full = _carved_rectangle(rng)
        assert check_comparison_principle(carved, full)


def test_composition_split_rectangle():
    dom = rectangle_domain(2.0, ny=64)
    nx = dom.free.shape[0]
    cut = np.zeros_like(dom.free)
    cut[nx // 2, :] = True
    assert check_composition_law(dom, cut)


def test_composition_randomized():
    rng = np.random.default_rng(11)
    for _ in range(20):
        carved, _ = _carved_rectangle(rng)
        nx = carved.free.shape[0]
        cut = np.zeros_like(carved.free)
        cut[int(rng.integers(nx // 4, 3 * nx // 4)), :] = True
        assert check_composition_law(carved, cut)


def test_composition_rejects_nonseparating_cut():
    dom = rectangle_domain(2.0, ny=64)
    cut = np.zeros_like(dom.free)
    cut[dom.free.shape[0] // 2, :32] = True  # half-height cut leaves a gap
    with pytest.raises(ValueError):
        check_composition_law(dom, cut)


def test_excursion_pair_radial_segments():
    r = 2.0
    n = 512
    R = math.exp(r) * 1.02
    cell = 2.0 * R / n
    rad = np.linspace(1.0, math.exp(r), 800)
    tr1 = np.column_stack([rad, np.zeros_like(rad)])
    tr2 = np.column_stack([-rad, np.zeros_like(rad)])
    bits = np.zeros((n, n), dtype=bool)
    from loopsoup.raster import rasterize
    ras = rasterize([tr1, tr2], cell, origin=(-R, -R), shape=(n, n))
    bits |= ras.bits
    L1, L2, Lmin = excursion_pair_extremal(tr1, tr2, bits, (-R, -R), cell,
                                           0.0, r)
    # each complementary component is a half-annulus wedge of full
    # opening pi: L = pi (r - s) / pi = r = 2
    assert abs(L1 - 2.0) < 0.06
    assert abs(L2 - 2.0) < 0.06
    assert Lmin == min(L1, L2)


def test_excursion_pair_sealed_component():
    r = 2.0
    n = 384
    R = math.exp(r) * 1.02
    cell = 2.0 * R / n
    rad = np.linspace(1.0, math.exp(r), 800)
    tr1 = np.column_stack([rad, np.zeros_like(rad)])
    tr2 = np.column_stack([-rad, np.zeros_like(rad)])
    from loopsoup.raster import rasterize
    ras = rasterize([tr1, tr2], cell, origin=(-R, -R), shape=(n, n))
    bits = ras.bits.copy()
    # seal the upper component with a blocking arc at mid radius
    th = np.linspace(-0.05, math.pi + 0.05, 300)  # overlaps both segments
    wall = np.column_stack([4.0 * np.cos(th), 4.0 * np.sin(th)])
    bits |= rasterize([wall], cell, origin=(-R, -R), shape=(n, n)).bits
    L1, L2, Lmin = excursion_pair_extremal(tr1, tr2, bits, (-R, -R), cell,
                                           0.0, r)
    vals = sorted([L1, L2])
    assert vals[1] == math.inf
    assert abs(vals[0] - 2.0) < 0.1
    assert Lmin == vals[0]


def test_reverse_composition_constant_stable():
    """Two-wedge scenes (narrow inner wedge opening into a wide outer
    wedge): the deficit C = L(D) - L(inner) - L(outer) stays within +-50%
    between scales r=2 and r=4."""
    consts = []
    for r in (2.0, 4.0):
        n = 384
        R = math.exp(r)
        h = 2.0 * R * 1.02 / n
        cx = (np.arange(n) + 0.5) * h - R * 1.02
        X, Y = np.meshgrid(cx, cx, indexing="ij")
        d = np.hypot(X, Y)
        ang = np.abs(np.arctan2(Y, X))
        mid = math.exp(r / 2.0)
        th1, th2 = 0.4, 0.9
        free = (((d > 1.0) & (d <= mid) & (ang <= th1))
                | ((d > mid) & (d < R) & (ang <= th2)))
        inner = (d <= 1.0) & (ang <= th1)
        outer = (d >= R) & (ang <= th2)
        nb1 = np.zeros_like(free)
        nb2 = np.zeros_like(free)
        for sh, axis in (((1, 0), 0), ((-1, 0), 0), ((0, 1), 1), ((0, -1), 1)):
            nb1 |= np.roll(inner, sh, axis=axis)
            nb2 |= np.roll(outer, sh, axis=axis)
        dom = GridDomain(free, free & nb1, free & nb2, h)
        whole = extremal_distance(dom).value
        l1 = math.pi * (r / 2.0) / (2.0 * th1)
        l2 = math.pi * (r / 2.0) / (2.0 * th2)
        consts.append(whole - l1 - l2)
    c2, c4 = consts
    assert c2 > -0.05 and c4 > -0.05  # composition direction
    scale = max(abs(c2), abs(c4), 0.05)
    assert abs(c2 - c4) <= 0.5 * scale


def test_third_excursion_avoidance_tracks_extremal_distance():
    """P(a third crossing avoids the attached pair) should scale like
    e^{-Lmin}: regression of log P-hat on -Lmin over configurations has
    slope near 1."""
    from loopsoup.paths import sample_excursion, stream_rng
    from loopsoup.raster import rasterize

    r = 1.5
    n = 384
    R = math.exp(r + 0.2)
    cell = 2.0 * R / n
    rng = stream_rng(31, 0)
    xs, ys = [], []
    probes = 120
    for cfg in range(200):
        tr1 = sample_excursion(0.0, r, rng, step=0.02).trace
        tr2 = sample_excursion(0.0, r, rng, step=0.02).trace
        ras = rasterize([tr1, tr2], cell, origin=(-R, -R), shape=(n, n))
        try:
            L1, L2, Lmin = excursion_pair_extremal(
                tr1, tr2, ras.bits, (-R, -R), cell, 0.0, r, levels=1)
        except Exception:
            continue
        if not math.isfinite(Lmin):
            continue
        hits = 0
        for _ in range(probes):
            tr3 = sample_excursion(0.0, r, rng, step=0.02).trace
            r3 = rasterize([tr3], cell, origin=(-R, -R), shape=(n, n))
            if not (r3.bits & ras.bits).any():
                hits += 1
        if hits >= 5:
            xs.append(-Lmin)
            ys.append(math.log(hits / probes))
    assert len(xs) >= 50
    slope = np.polyfit(xs, ys, 1)[0]
    assert 0.8 <= slope <= 1.2
