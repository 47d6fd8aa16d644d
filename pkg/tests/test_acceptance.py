"""End-to-end acceptance campaigns.

Each test here pins one deliverable of the laboratory at campaign scale:
closed-form exponents, the extremal-distance solver against analytic
values, the structural-inequality property suites, the Monte Carlo exponent estimates
against their closed-form oracles, the tilt estimators against each
other, the landing-zone separation frequency, the dimension scheme, and
the engineering invariants.

The heavy Monte Carlo criteria are sized for a single core by default.
Setting LOOPSOUP_FULL=1 switches them to full workstation-scale trial
counts; assertions and tolerances are identical in both modes, only the
statistical resolution changes.

Known failures are left in place deliberately (red over gamed green):

* ``test_soup_exponent_in_oracle_window``: the c=1 exponent estimate is
  dominated by the loop-duration cutoff tied to the raster cell; the
  fitted slope moves from 1.55 to far above 2 as the grid refines from
  256 to 1024 at fixed radii, so no affordable configuration lands in
  the oracle window [0.75, 1.35].  The companion trend test (the c=1
  fit exceeds the c=0 fit by more than three pooled standard errors)
  does pass.
* ``test_last_visit_scaling``: the fitted log-log slope of the
  last-visit non-disconnection frequency sits near -0.3 at reachable
  radii, far from the asymptotic -1 window; see the per-radius
  frequencies the test prints on failure.
* ``test_tilt_small_lambda_matches_untilted_fit``: the plug-in moment
  estimate of E[Z^lambda] at lambda=0.05 carries a truncation bias of
  order m^(-lambda/xi') that decays too slowly in the inner-sample count
  m to reach the untilted fit at any affordable m.
* ``test_separation_frequency_floor``: the per-endpoint confinement
  probability of the separation event is a scale-invariant constant of
  about 0.15 per boundary circle, putting the k=2 event frequency near
  2e-4, two orders below the 0.05 floor asserted here.
* ``test_visit_probability_scaling``: the visit probability scales like
  (n - n0)^(-k) with an offset n0 near the separation level j; at
  reachable n the local log-n slope is steeper than -k by the factor
  n/(n - n0).
"""

import json
import math
import os

import numpy as np
import pytest

from loopsoup import formulas as fx
from loopsoup.campaigns import (CampaignSpec, count_kn_squares, estimate_b_tilde,
                                estimate_last_visit, estimate_p0,
                                estimate_separation_frequency,
                                estimate_Zr_moment, fkg_check, merge_tallies,
                                probe_mid_squares, sample_kn_scene,
                                tally_radius)
from loopsoup.extremal import (GridDomain, annulus_domain,
                               check_comparison_principle,
                               check_composition_law, extremal_distance,
                               rectangle_domain, wedge_domain)
from loopsoup.paths import SoupConfig, stream_rng

FULL = os.environ.get("LOOPSOUP_FULL") == "1"


def _n(full, reduced):
    return full if FULL else reduced


# ---------------------------------------------------------------------------
# 1. closed-form suite
# ---------------------------------------------------------------------------


def test_closed_form_suite():
    tol = 1e-12
    assert abs(fx.xi(0.0, 2.0) - 2.0 / 3.0) < tol
    for beta in np.arange(1.0, 8.0, 0.5):
        assert abs(fx.xi(1.0, beta) - beta / 2.0) < tol
    for c in np.linspace(0.0, 1.0, 101):
        assert abs(fx.c_of_kappa(fx.kappa_of_c(c)) - c) < tol * 100
        for beta in (1.0, 2.0, 4.0, 6.0):
            assert abs(fx.eta_kappa(fx.kappa_of_c(c), beta)
                       - fx.xi(c, beta)) < tol


# ---------------------------------------------------------------------------
# 2. no triple points: xi(c, 6) > 2 throughout the soup range
# ---------------------------------------------------------------------------


def test_no_triple_points_inequality():
    for c in np.arange(0.0, 1.0 + 1e-9, 1e-3):
        assert fx.xi(min(c, 1.0), 6.0) > 2.0


# ---------------------------------------------------------------------------
# 3. extremal solver analytic cases
# ---------------------------------------------------------------------------


def test_extremal_analytic_cases():
    for L in (1.0, 2.0, 5.0):
        res = extremal_distance(rectangle_domain(L, ny=256))
        assert abs(res.value - L) / L < 0.01
    res = extremal_distance(wedge_domain(0.5, 0.0, 2.0, n=256))
    expected = math.pi * 2.0 / (2.0 * 0.5)
    assert abs(res.value - expected) / expected < 0.02
    res = extremal_distance(annulus_domain(0.0, 2.0, n=256))
    assert abs(res.value - 1.0) < 0.02


# ---------------------------------------------------------------------------
# 4. structural inequalities: comparison, composition, positive association
# ---------------------------------------------------------------------------


def _carved_rectangle(rng, ny=48):
    dom = rectangle_domain(1.5, ny=ny)
    free = dom.free.copy()
    nx = free.shape[0]
    for _ in range(rng.integers(1, 5)):
        i = rng.integers(2, nx - 2)
        j = rng.integers(2, ny - 2)
        free[i:i + int(rng.integers(1, 6)),
             j:j + int(rng.integers(1, 6))] = False
    free[0, :] = free[-1, :] = True  # keep the boundary arcs intact
    return GridDomain(free, dom.arc1, dom.arc2, dom.cell), dom


def test_comparison_principle_randomized():
    rng = np.random.default_rng(401)
    for _ in range(100):
        carved, full = _carved_rectangle(rng)
        assert check_comparison_principle(carved, full)


def test_composition_law_randomized():
    rng = np.random.default_rng(402)
    for _ in range(100):
        carved, _ = _carved_rectangle(rng)
        nx = carved.free.shape[0]
        cut = np.zeros_like(carved.free)
        cut[int(rng.integers(nx // 4, 3 * nx // 4)), :] = True
        assert check_composition_law(carved, cut)


def test_fkg_disjoint_annulus_pair():
    def no_crossing(cx, cy, r1, r2):
        def ev(soup):
            for lp in soup:
                tr = np.asarray(lp.trace)
                d = np.hypot(tr[:, 0] - cx, tr[:, 1] - cy)
                if d.min() < r1 and d.max() > r2:
                    return False
            return True
        return ev

    cfg = SoupConfig(c=0.5, region=(-2.0, -2.0, 2.0, 2.0), t_min=0.1,
                     t_max=1.0, dt=0.1 / 8, seed=404)
    assert fkg_check(no_crossing(-1.2, 0.0, 0.3, 0.6),
                     no_crossing(1.2, 0.0, 0.3, 0.6), cfg, trials=10_000)


# ---------------------------------------------------------------------------
# 5. classical exponents at c=0 via non-disconnection frequencies
# ---------------------------------------------------------------------------


def _c5_spec(k, seed):
    return CampaignSpec(c=0.0, k=k, radii=[1.0, 2.0, 3.0, 4.0, 5.0],
                        trials_per_radius=_n(100_000, 10_000), grid_n=1024,
                        seed=seed, drop_smallest=True)


def test_one_path_exponent_quarter():
    fit = estimate_p0(_c5_spec(1, 51))
    print(f"xi_hat(c=0, k=1) = {fit.slope:.4f} +- {fit.stderr:.4f}")
    assert abs(fit.slope - 0.25) <= 0.08


def test_two_path_exponent_two_thirds():
    fit = estimate_p0(_c5_spec(2, 52))
    print(f"xi_hat(c=0, k=2) = {fit.slope:.4f} +- {fit.stderr:.4f}")
    assert abs(fit.slope - 2.0 / 3.0) <= 0.10


# ---------------------------------------------------------------------------
# 6. last-visit truncation scaling (known red at reachable radii)
# ---------------------------------------------------------------------------


def test_last_visit_scaling():
    spec = CampaignSpec(c=0.0, k=1, radii=[1.0, 2.0, 3.0, 4.0, 5.0],
                        trials_per_radius=_n(100_000, 10_000), grid_n=512,
                        seed=61)
    fit = estimate_last_visit(spec)
    xs, ys, ws = [], [], []
    for r, p, trials, succ in fit.per_radius:
        print(f"last-visit: r={r} p_hat={p:.4f} ({succ}/{trials})")
        xs.append(math.log(r))
        ys.append(math.log(p))
        ws.append(p * trials / max(1.0 - p, 1e-12))
    slope = np.polyfit(xs, ys, 1, w=np.sqrt(ws))[0]
    print(f"last-visit log-log slope = {slope:.4f}")
    assert -1.2 <= slope <= -0.8


# ---------------------------------------------------------------------------
# 7. loop-soup direction: the c=1 exponent exceeds the c=0 fit
# ---------------------------------------------------------------------------

_C7_RADII = [2.0, 2.5, 3.0]


@pytest.fixture(scope="module")
def soup_fits():
    fit0 = estimate_p0(CampaignSpec(c=0.0, k=2, radii=_C7_RADII,
                                    trials_per_radius=_n(20_000, 6_000),
                                    grid_n=512, seed=73))
    fit1 = estimate_p0(CampaignSpec(c=1.0, k=2, radii=_C7_RADII,
                                    trials_per_radius=_n(20_000, 6_000),
                                    grid_n=512, seed=74))
    print(f"xi_hat(c=0) = {fit0.slope:.4f} +- {fit0.stderr:.4f}")
    print(f"xi_hat(c=1) = {fit1.slope:.4f} +- {fit1.stderr:.4f}")
    return fit0, fit1


def test_soup_raises_the_exponent(soup_fits):
    fit0, fit1 = soup_fits
    pooled = math.hypot(fit0.stderr, fit1.stderr)
    print(f"difference = {fit1.slope - fit0.slope:.4f}, "
          f"3 * pooled stderr = {3 * pooled:.4f}")
    assert fit1.slope - fit0.slope > 3.0 * pooled


def test_soup_exponent_in_oracle_window(soup_fits):
    """Known red: the c=1 estimate is cutoff-dominated at desk scale (the
    fitted slope ranges 1.4-2.0 as the raster resolution, and with it the
    loop-duration cutoff, varies), so it misses the oracle window around
    xi(1, 2) = 1 at every affordable configuration."""
    _, fit1 = soup_fits
    assert 0.75 <= fit1.slope <= 1.35


def test_soup_cutoff_sweep_reported():
    """Quadrupling the loop-duration cutoff: the shift of the c=1 fit is
    reported, not asserted (the cutoff bias is a known systematic)."""
    kw = dict(c=1.0, k=2, radii=[1.5, 2.0, 2.5],
              trials_per_radius=_n(6_000, 1_500), grid_n=256, seed=75)
    base = estimate_p0(CampaignSpec(**kw))
    swept = estimate_p0(CampaignSpec(**kw, tmax_base=16.0))
    print(f"cutoff sweep: xi_hat = {base.slope:.4f} +- {base.stderr:.4f} "
          f"(t_max base 4) -> {swept.slope:.4f} +- {swept.stderr:.4f} "
          f"(t_max base 16); shift = {swept.slope - base.slope:+.4f}")


# ---------------------------------------------------------------------------
# 8. tilt coherence
# ---------------------------------------------------------------------------


def test_tilt_small_lambda_matches_untilted_fit():
    """Known red: the plug-in moment at lambda=0.05 is biased upward by
    the truncation of Z at the inner-sample resolution 1/m."""
    radii = [1.0, 1.5, 2.0, 2.5]
    fit0 = estimate_p0(CampaignSpec(c=0.0, k=2, radii=radii,
                                    trials_per_radius=_n(20_000, 4_000),
                                    grid_n=512, seed=81))
    fitl = estimate_Zr_moment(CampaignSpec(c=0.0, k=2, radii=radii,
                                           trials_per_radius=_n(1_600, 400),
                                           lam=0.05, inner_samples=8192,
                                           grid_n=512, seed=82))
    print(f"lambda=0 fit {fit0.slope:.4f}, lambda=0.05 fit {fitl.slope:.4f}, "
          f"difference {abs(fitl.slope - fit0.slope):.4f}")
    assert abs(fitl.slope - fit0.slope) <= 0.10


def test_tilt_cross_estimator_agreement():
    radii = [2.0, 2.5, 3.0, 3.5]
    fit_b = estimate_b_tilde(CampaignSpec(c=0.0, k=2, radii=radii,
                                          trials_per_radius=_n(400, 200),
                                          lam=0.5, grid_n=256, seed=31,
                                          drop_smallest=True), levels=1)
    fit_z = estimate_Zr_moment(CampaignSpec(c=0.0, k=2, radii=radii,
                                            trials_per_radius=_n(4_800, 2_400),
                                            lam=0.5, inner_samples=4096,
                                            grid_n=512, seed=32,
                                            drop_smallest=True))
    print(f"extremal-tilt fit {fit_b.slope:.4f} +- {fit_b.stderr:.4f}, "
          f"moment fit {fit_z.slope:.4f} +- {fit_z.stderr:.4f}")
    assert abs(fit_b.slope - fit_z.slope) <= 0.15


# ---------------------------------------------------------------------------
# 9. landing-zone separation frequency
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def separation_reports():
    spec = CampaignSpec(c=0.0, k=2, radii=[2.0, 4.0],
                        trials_per_radius=_n(20_000, 6_000), grid_n=1024,
                        seed=91)
    reports = estimate_separation_frequency(spec, alpha=0.05, step=0.015)
    for rep in reports:
        print(f"separation: r={rep.r} freq={rep.frequency:.2e} "
              f"({rep.separated}/{rep.nondisconnected} non-disconnecting)")
    return reports


def test_separation_frequency_stable_across_radii(separation_reports):
    a, b = separation_reports
    pooled = math.hypot(a.stderr, b.stderr)
    assert abs(a.frequency - b.frequency) < 3.0 * pooled


def test_separation_frequency_floor(separation_reports):
    """Known red: the event frequency is near 2e-4 at alpha=0.05."""
    for rep in separation_reports:
        assert rep.frequency > 0.05


# ---------------------------------------------------------------------------
# 10. dimension scheme
# ---------------------------------------------------------------------------

_N_LIST = [8, 9, 10, 11]


def _dim_scan(k, scenes):
    counts = np.zeros(len(_N_LIST), dtype=np.int64)
    hits = np.zeros(len(_N_LIST), dtype=np.int64)
    tots = np.zeros(len(_N_LIST), dtype=np.int64)
    for s in range(scenes):
        scene = sample_kn_scene(stream_rng(100 + k, s))
        rep = count_kn_squares(4, _N_LIST, k, scene)
        counts += np.array(rep.counts)
        for i, n in enumerate(_N_LIST):
            h, t = probe_mid_squares(4, n, k, scene)
            hits[i] += h
            tots[i] += t
    return counts, hits / tots


def test_frontier_dimension_estimate():
    counts, _ = _dim_scan(1, scenes=_n(30, 10))
    dim = np.polyfit(np.asarray(_N_LIST, float),
                     np.log2(counts.astype(float)), 1)[0]
    print(f"box-count dimension estimate (k=1): {dim:.4f} "
          f"(oracle 2 - xi(0,2) = {2 - fx.xi(0.0, 2.0):.4f})")
    assert abs(dim - 4.0 / 3.0) <= 0.25


def test_visit_probability_scaling():
    """Known red at reachable n: local slope is -k * n / (n - n0)."""
    for k in (1, 2):
        _, frac = _dim_scan(k, scenes=_n(30, 10))
        slope = np.polyfit(np.log(np.asarray(_N_LIST, float)),
                           np.log(frac), 1)[0]
        print(f"visit-probability log-n slope (k={k}): {slope:.4f}")
        assert -k - 0.3 <= slope <= -k + 0.3


# ---------------------------------------------------------------------------
# 11. engineering invariants
# ---------------------------------------------------------------------------


def test_deterministic_replay_bit_identical_csv(tmp_path):
    from loopsoup.cli import main

    args = ["disconnect", f"outdir={tmp_path}", "radii=1,1.5,2",
            "trials=200", "grid_n=128", "k=1", "seed=11"]
    assert main(args) == 0
    first = (tmp_path / "disconnect.csv").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "disconnect.csv").read_bytes() == first
    doc = json.loads((tmp_path / "disconnect.json").read_text())
    assert doc["config"]["seed"] == 11


def test_shard_merge_associativity():
    spec = CampaignSpec(c=0.0, k=1, radii=[1.0, 1.5, 2.0],
                        trials_per_radius=200, grid_n=128, seed=5)
    whole = tally_radius(spec, 1.5, 0, 200)
    a = tally_radius(spec, 1.5, 0, 80)
    b = tally_radius(spec, 1.5, 80, 70)
    c = tally_radius(spec, 1.5, 150, 50)
    for t in (merge_tallies(merge_tallies(a, b), c),
              merge_tallies(a, merge_tallies(b, c))):
        assert (t.trials, t.successes, t.degenerate, t.attrition) == \
               (whole.trials, whole.successes, whole.degenerate,
                whole.attrition)


def test_union_find_matches_brute_force_closure():
    from loopsoup.clusters import brute_force_partition, build_clusters
    from loopsoup.paths import sample_loop_soup

    checked = 0
    for seed in range(30):
        cfg = SoupConfig(c=0.8, region=(-1.0, -1.0, 1.0, 1.0), t_min=0.05,
                         t_max=0.5, dt=0.05 / 8, seed=seed)
        soup = sample_loop_soup(cfg, stream_rng(seed, 0))[:20]
        if not soup:
            continue
        cs = build_clusters(soup, cell=0.04)
        roots = {}
        for i, r in enumerate(cs.parent):
            roots.setdefault(int(r), []).append(i)
        fast = sorted(sorted(m) for m in roots.values())
        assert fast == brute_force_partition(soup, cell=0.04)
        checked += 1
    assert checked >= 10


def test_disconnects_monotone_under_obstacles():
    from loopsoup.connectivity import (AnnulusScene, DegenerateSceneError,
                                       disconnects)
    from loopsoup.raster import rasterize

    r, n = 1.5, 384
    big_r = math.exp(r + 0.2)
    cell = 2.0 * big_r / n
    th = np.linspace(0.0, 1.7 * math.pi, 400)
    arc = np.column_stack([3.0 * np.cos(th), 3.0 * np.sin(th)])
    ras = rasterize([arc], cell, origin=(-big_r, -big_r), shape=(n, n))
    bits = ras.bits.copy()

    def verdict(b):
        ras2 = rasterize([], cell, origin=(-big_r, -big_r), shape=(n, n))
        ras2.bits[:] = b
        try:
            return disconnects(AnnulusScene(ras2, 0.0, r))
        except DegenerateSceneError:
            return True

    rng = np.random.default_rng(3)
    prev = verdict(bits)
    for _ in range(100):
        i, j = rng.integers(0, n, size=2)
        bits[i, j] = True
        cur = verdict(bits)
        assert cur or not prev  # blocked cells can only help disconnection
        prev = cur
