"""Monte Carlo campaigns: disconnection exponents, conditional-avoidance
moments, excursion tilts, the (k,n)-square dimension scheme, and an FKG
harness.

Every campaign is sharded into fixed-size blocks of trials; trial t of a
campaign always uses the random stream derived from (seed, t), so any
sharding of the work gives bit-identical tallies and the merge is plain
addition.  Degenerate scenes (the inner circle fully swallowed by the
obstacle raster) count as disconnections -- at raster resolution the
obstacle covers C_0, which disconnects it -- while walker step-cap and
soup-capacity failures are excluded from denominators and reported in the
attrition tally.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as _k
from .clusters import build_clusters, attach_clusters
from .extremal import SolverError, excursion_pair_extremal
from .fitting import ExponentFit, FitError, fit_exponent
from .paths import SoupConfig, sample_excursion, sample_loop_soup, stream_rng
from .raster import rasterize

__all__ = ["CampaignSpec", "RadiusTally", "SquareCountReport", "KnScene",
           "CampaignError", "InsufficientSuccessesError", "MonotonicityError",
           "tally_radius", "merge_tallies", "estimate_p0",
           "estimate_last_visit", "estimate_Zr_moment", "estimate_Zr_moments",
           "estimate_b_tilde", "SeparationReport",
           "estimate_separation_frequency", "sample_kn_scene",
           "count_kn_squares",
           "probe_mid_squares", "fkg_check"]

_SHARD = 4096
_S0_HALF = 1.0 / 16.0  # the reference square S_0 = [-1/16, 1/16]^2


class CampaignError(RuntimeError):
    pass


class InsufficientSuccessesError(CampaignError):
    """A radius produced fewer than 10 successes; the log-scale estimate
    would be dominated by noise.  Use fewer radii or more trials."""


class MonotonicityError(ValueError):
    """An event handed to fkg_check is not decreasing in the loop set."""


@dataclass
class CampaignSpec:
    """Parameters of one exponent-estimation campaign."""

    c: float
    k: int
    radii: list
    trials_per_radius: int
    lam: float = 0.0
    inner_samples: int = 0  # m, for the Z_r moment estimator
    grid_n: int = 512
    margin: float = 0.2
    step_factor: float = 0.5
    tmin_factor: float = 1.0  # t_min = tmin_factor * cell^2
    tmax_base: float = 4.0  # t_max = (tmax_base * e^r)^2
    seed: int = 0
    drop_smallest: bool = False
    use_excursions: bool = False
    workers: int = 1

    def validate(self):
        errs = []
        if not (0.0 <= self.c <= 1.0):
            errs.append(f"c must be in [0, 1], got {self.c}")
        if self.k < 1:
            errs.append(f"k must be >= 1, got {self.k}")
        if self.lam < 0:
            errs.append(f"lambda must be >= 0, got {self.lam}")
        rs = list(self.radii)
        if not rs or any(r < 1.0 for r in rs):
            errs.append(f"radii must all be >= 1, got {rs}")
        if sorted(rs) != rs:
            errs.append(f"radii must be ascending, got {rs}")
        if self.trials_per_radius < 100:
            errs.append(f"trials_per_radius must be >= 100, "
                        f"got {self.trials_per_radius}")
        if self.inner_samples < 0:
            errs.append(f"inner_samples must be >= 0, "
                        f"got {self.inner_samples}")
        if self.grid_n < 64:
            errs.append(f"grid_n must be >= 64, got {self.grid_n}")
        if not self.margin > 0:
            errs.append(f"margin must be positive, got {self.margin}")
        if not self.step_factor > 0:
            errs.append(f"step_factor must be positive, got {self.step_factor}")
        if self.workers < 1:
            errs.append(f"workers must be >= 1, got {self.workers}")
        if errs:
            raise ValueError("invalid CampaignSpec: " + "; ".join(errs))


@dataclass
class RadiusTally:
    r: float
    trials: int = 0  # completed trials (denominator)
    successes: int = 0
    degenerate: int = 0  # subset of the disconnections
    attrition: int = 0  # step-cap / capacity failures, outside denominator

    @property
    def p_hat(self):
        return self.successes / self.trials if self.trials else math.nan


def merge_tallies(a: RadiusTally, b: RadiusTally):
    if a.r != b.r:
        raise ValueError(f"cannot merge tallies at r={a.r} and r={b.r}")
    return RadiusTally(a.r, a.trials + b.trials, a.successes + b.successes,
                       a.degenerate + b.degenerate, a.attrition + b.attrition)


def _tally_outcomes(r, outcomes):
    t = RadiusTally(r)
    t.successes = int((outcomes == 1).sum())
    t.degenerate = int((outcomes == -2).sum())
    t.attrition = int((outcomes == -1).sum() + (outcomes == -3).sum())
    t.trials = int(outcomes.size) - t.attrition
    return t


def tally_radius(spec: CampaignSpec, r, trial_start, ntrials):
    """Tally of ``ntrials`` non-disconnection trials starting at global
    trial index ``trial_start`` (sharding-invariant)."""
    out = np.empty(ntrials, dtype=np.int8)
    _k.run_p0_batch(spec.seed, trial_start, ntrials, spec.k, spec.c, r,
                    spec.grid_n, spec.margin, spec.step_factor,
                    spec.tmin_factor, spec.tmax_base,
                    spec.use_excursions, out)
    return _tally_outcomes(r, out)


def _run_sharded(fn, total, workers):
    """Run fn(trial_start, ntrials) over shards, merging in index order."""
    shards = [(s, min(_SHARD, total - s)) for s in range(0, total, _SHARD)]
    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda a: fn(*a), shards))
    else:
        results = [fn(*a) for a in shards]
    return results


def estimate_p0(spec: CampaignSpec) -> ExponentFit:
    """Fit of -log p(c, k, r, 0) against r from non-disconnection trials.

    Per radius: k crossings of A(0, r) plus, for c > 0, the soup clusters
    they touch; success = the union does not disconnect C_0 from the
    raster frame.  Weighted least squares on the per-radius frequencies.
    """
    spec.validate()
    if spec.lam != 0:
        raise ValueError("estimate_p0 requires lambda = 0 in the spec")
    tallies = []
    for r in spec.radii:
        parts = _run_sharded(
            lambda s, m, rr=r: tally_radius(spec, rr, s, m),
            spec.trials_per_radius, spec.workers)
        t = parts[0]
        for p in parts[1:]:
            t = merge_tallies(t, p)
        if t.successes < 10:
            raise InsufficientSuccessesError(
                f"only {t.successes} successes at r={r} "
                f"({t.trials} trials); use fewer radii or more trials")
        tallies.append(t)
    points = [(t.r, t.p_hat, t.p_hat * (1 - t.p_hat) / t.trials)
              for t in tallies]
    fit = fit_exponent(points, drop_smallest=spec.drop_smallest)
    fit.per_radius = [(t.r, t.p_hat, t.trials, t.successes) for t in tallies]
    fit.attrition = {t.r: t.attrition for t in tallies}
    return fit


def estimate_last_visit(spec: CampaignSpec) -> ExponentFit:
    """Same fit for the last-visit truncation event: one Brownian motion
    from 1 to C_r, truncated at its last visit of C_0, tested for
    non-disconnection of C_0."""
    spec.validate()

    def run(r, s, m):
        out = np.empty(m, dtype=np.int8)
        _k.run_last_visit_batch(spec.seed, s, m, r, spec.grid_n,
                                spec.margin, spec.step_factor, out)
        return _tally_outcomes(r, out)

    tallies = []
    for r in spec.radii:
        parts = _run_sharded(lambda s, m, rr=r: run(rr, s, m),
                             spec.trials_per_radius, spec.workers)
        t = parts[0]
        for p in parts[1:]:
            t = merge_tallies(t, p)
        if t.successes < 10:
            raise InsufficientSuccessesError(
                f"only {t.successes} successes at r={r}")
        tallies.append(t)
    points = [(t.r, t.p_hat, t.p_hat * (1 - t.p_hat) / t.trials)
              for t in tallies]
    fit = fit_exponent(points, drop_smallest=spec.drop_smallest)
    fit.per_radius = [(t.r, t.p_hat, t.trials, t.successes) for t in tallies]
    fit.attrition = {t.r: t.attrition for t in tallies}
    return fit


def estimate_Zr_moments(spec: CampaignSpec, lambdas) -> dict:
    """{lambda: ExponentFit} for E[(Z_r)^lambda], all lambdas sharing the
    same trials (common random numbers, so differences across lambda carry
    no extra Monte Carlo noise)."""
    spec.validate()
    if any(l <= 0 for l in lambdas):
        raise ValueError("all lambdas must be > 0 (use estimate_p0 at 0)")
    m = spec.inner_samples
    if m < 50:
        raise ValueError(f"inner_samples must be >= 50 for the plug-in "
                         f"moment estimator, got {m}")
    per_lambda = {l: [] for l in lambdas}
    attrition = {}
    for r in spec.radii:
        def run(s, nt, rr=r):
            counts = np.empty(nt, dtype=np.int64)
            inner = np.zeros(nt, dtype=np.int64)
            _k.run_avoid_batch(spec.seed, s, nt, spec.k, spec.c, rr, m,
                               spec.grid_n, spec.margin, spec.step_factor,
                               spec.tmin_factor, spec.tmax_base,
                               counts, inner)
            return counts, inner

        parts = _run_sharded(run, spec.trials_per_radius, spec.workers)
        counts = np.concatenate([p[0] for p in parts])
        valid = counts >= 0
        attrition[r] = int((~valid).sum())
        z = counts[valid] / m
        nv = z.size
        if nv == 0:
            raise InsufficientSuccessesError(f"no completed trials at r={r}")
        for l in lambdas:
            vals = z**l  # 0^l = 0 for l > 0
            mean = float(vals.mean())
            if mean * nv < 10:
                raise InsufficientSuccessesError(
                    f"Z^lambda mass too small at r={r}, lambda={l}")
            var = float(vals.var(ddof=1)) / nv
            per_lambda[l].append((r, mean, var))
    fits = {}
    for l in lambdas:
        fit = fit_exponent(per_lambda[l], drop_smallest=spec.drop_smallest)
        fit.per_radius = [(r, mean, spec.trials_per_radius - attrition[r],
                           mean) for (r, mean, _) in per_lambda[l]]
        fit.attrition = dict(attrition)
        fits[l] = fit
    return fits


def estimate_Zr_moment(spec: CampaignSpec) -> ExponentFit:
    """ExponentFit for E[(Z_r)^lambda] at spec.lam (> 0)."""
    if not spec.lam > 0:
        raise ValueError("estimate_Zr_moment requires lambda > 0")
    return estimate_Zr_moments(spec, [spec.lam])[spec.lam]


# ---------------------------------------------------------------------------
# Excursion tilt
# ---------------------------------------------------------------------------


def _b_tilde_radius(spec, lam, r, ri, levels):
    """(mean e^{-lam L}, var of the mean, attrition) at one radius."""
    n = spec.grid_n
    R = math.exp(r + spec.margin)
    h = 2.0 * R / n
    exc_step = spec.step_factor * h / math.exp(r)
    t_min = spec.tmin_factor * h * h
    t_max = (spec.tmax_base * math.exp(r)) ** 2
    vals = []
    failures = 0
    for t in range(spec.trials_per_radius):
        rng = stream_rng(spec.seed, ri * 1_000_000_000 + t)
        e1 = sample_excursion(0.0, r, rng, step=exc_step)
        e2 = sample_excursion(0.0, r, rng, step=exc_step)
        if spec.c > 0:
            cfg = SoupConfig(c=spec.c, region=(-R, -R, R, R), t_min=t_min,
                             t_max=t_max, dt=t_min / 8.0, seed=0)
            soup = sample_loop_soup(cfg, rng)
            cs = build_clusters(soup, cell=h)
            try:
                a1 = attach_clusters([e1.trace], cs)
                a2 = attach_clusters([e2.trace], cs)
            except ValueError:
                failures += 1
                continue
            bits = a1.bits | a2.bits
            origin = a1.origin
        else:
            ras = rasterize([e1.trace, e2.trace], h,
                            origin=(-R, -R), shape=(n, n))
            bits = ras.bits
            origin = (-R, -R)
        try:
            _, _, lmin = excursion_pair_extremal(
                e1.trace, e2.trace, bits, origin, h, 0.0, r, levels=levels)
        except SolverError:
            failures += 1
            continue
        vals.append(0.0 if lmin == math.inf else math.exp(-lam * lmin))
    if not vals:
        raise InsufficientSuccessesError(f"no completed trials at r={r}")
    v = np.asarray(vals)
    return float(v.mean()), float(v.var(ddof=1)) / v.size, failures


def estimate_b_tilde(spec: CampaignSpec, lam=None, levels=1) -> ExponentFit:
    """Fit of -log(r^{-2} E[e^{-lam L~_r}]) against r.

    L~_r is the smaller of the two pi-extremal distances across the
    complement of the attached excursion pair in A(0, r); an infinite
    distance (the pair disconnects C_0 from C_r) contributes exactly 0 to
    the average.  Solver failures are dropped from the average and counted
    in the attrition tally.
    """
    spec.validate()
    if spec.k != 2:
        raise ValueError("the excursion-pair tilt is defined for k = 2")
    if lam is None:
        lam = spec.lam
    if not lam > 0:
        raise ValueError("lam must be > 0")
    points = []
    per_radius = []
    attrition = {}
    for ri, r in enumerate(spec.radii):
        mean, var, failed = _b_tilde_radius(spec, lam, r, ri, levels)
        b = mean / (r * r)
        points.append((r, b, var / r**4))
        per_radius.append((r, b, spec.trials_per_radius - failed, mean))
        attrition[r] = failed
    fit = fit_exponent(points, drop_smallest=spec.drop_smallest)
    fit.per_radius = per_radius
    fit.attrition = attrition
    return fit


# ---------------------------------------------------------------------------
# landing-zone separation frequency
# ---------------------------------------------------------------------------


@dataclass
class SeparationReport:
    """Conditional frequency of the landing-zone separation event among
    non-disconnecting k-crossing configurations at one radius."""

    r: float
    alpha: float
    trials: int
    nondisconnected: int
    separated: int

    @property
    def frequency(self):
        if self.nondisconnected == 0:
            return 0.0
        return self.separated / self.nondisconnected

    @property
    def stderr(self):
        n = self.nondisconnected
        if n == 0:
            return 0.0
        p = self.frequency
        return math.sqrt(max(p * (1.0 - p), 1.0 / n) / n)


def estimate_separation_frequency(spec: CampaignSpec, alpha,
                                  step=0.015) -> list:
    """SeparationReport per radius: among trials whose k excursion traces
    do not disconnect C_0 from infinity, the fraction whose configuration
    satisfies the full landing-zone separation predicate.

    Traces are sampled at one common spatial step for every radius: the
    separation event is dominated by endpoint confinement inside shells of
    width alpha around the boundary circles, and its empirical frequency
    decreases as the step refines, so mixed steps would fake a radius
    trend.  Only the soup-free case is supported; with clusters attached
    the confinement condition needs raster cells finer than alpha near the
    inner circle, which a single scene grid cannot provide across an
    annulus of aspect e^r.
    """
    from .connectivity import (AnnulusScene, DegenerateSceneError,
                               alpha_sep_predicate, disconnects)

    spec.validate()
    if spec.c != 0.0:
        raise ValueError("separation-frequency estimation supports c=0 only")
    if not (0 < alpha < 0.5):
        raise ValueError(f"alpha must be in (0, 1/2), got {alpha}")
    reports = []
    for ri, r in enumerate(spec.radii):
        big_r = math.exp(r + spec.margin)
        cell = 2.0 * big_r / spec.grid_n
        n_nd = n_sep = 0
        for t in range(spec.trials_per_radius):
            rng = stream_rng(spec.seed, ri * 10**9 + t)
            traces = [sample_excursion(0.0, r, rng, step=step).trace
                      for _ in range(spec.k)]
            ras = rasterize(traces, cell, origin=(-big_r, -big_r),
                            shape=(spec.grid_n, spec.grid_n))
            scene = AnnulusScene(ras, 0.0, r)
            try:
                if disconnects(scene):
                    continue
            except DegenerateSceneError:
                continue
            n_nd += 1
            if alpha_sep_predicate(traces, None, 0.0, r, alpha,
                                   cluster_set=None, scene_raster=ras):
                n_sep += 1
        reports.append(SeparationReport(r, alpha, spec.trials_per_radius,
                                        n_nd, n_sep))
    return reports


# ---------------------------------------------------------------------------
# (k, n)-square dimension scheme
# ---------------------------------------------------------------------------


@dataclass
class SquareCountReport:
    j: int
    n_values: list
    counts: list  # |S_{k,n}| per n
    dimension: float
    stderr: float
    visited: list = field(default_factory=list)  # entered squares per n


@dataclass
class KnScene:
    """One loop conditioned to meet S_0, plus its ambient soup."""

    trace: np.ndarray
    soup: list = field(default_factory=list)
    duration: float = 0.25


def sample_kn_scene(rng, c=0.0, duration=0.25, dt=1e-7, root_half=0.5,
                    max_tries=10000):
    """Loop of fixed duration conditioned to meet S_0, by rejection.

    The root is uniform in [-root_half, root_half]^2 and the bridge is
    resampled until its trace enters S_0; this is the cutoff loop measure
    restricted to {duration = const, trace meets S_0}, normalized.
    """
    nsteps = int(round(duration / dt))
    for _ in range(max_tries):
        root = (rng.random(2) - 0.5) * 2 * root_half
        g = rng.standard_normal((nsteps, 2)) * math.sqrt(dt)
        w = np.vstack([[0.0, 0.0], np.cumsum(g, axis=0)])
        w -= (np.arange(nsteps + 1) / nsteps)[:, None] * w[-1]
        trace = root + w
        inside = (np.abs(trace) <= _S0_HALF).all(axis=1)
        if inside.any():
            soup = []
            if c > 0:
                cfg = SoupConfig(c=c, region=(-1.0, -1.0, 1.0, 1.0),
                                 t_min=1e-4, t_max=4.0, dt=1e-5, seed=0)
                soup = sample_loop_soup(cfg, rng)
            return KnScene(trace=trace, soup=soup, duration=duration)
    raise CampaignError("rejection sampler failed to hit S_0")


def _entries_by_square(trace, n_level):
    m = len(trace)
    xs = np.ascontiguousarray(trace[:, 0])
    ys = np.ascontiguousarray(trace[:, 1])
    cap = m
    entry_sq = np.empty(cap, dtype=np.int64)
    entry_time = np.empty(cap, dtype=np.int64)
    cnt = _k.square_entries(xs, ys, _S0_HALF, n_level, entry_sq, entry_time)
    if cnt < 0:
        raise CampaignError("entry-event buffer overflow")
    entry_sq = entry_sq[:cnt]
    entry_time = entry_time[:cnt]
    order = np.argsort(entry_sq, kind="stable")
    sq_sorted = entry_sq[order]
    time_sorted = entry_time[order]
    square_ids, first = np.unique(sq_sorted, return_index=True)
    entry_off = np.concatenate([first, [cnt]]).astype(np.int64)
    return xs, ys, sq_sorted, time_sorted, entry_off, square_ids


def _phase_counts(xs, ys, sq_sorted, time_sorted, entry_off, square_ids,
                  k_phases, n_level, j_level, block=64):
    nb = (len(xs) + block - 1) // block
    bxmax = np.empty(nb)
    bxmin = np.empty(nb)
    bymax = np.empty(nb)
    bymin = np.empty(nb)
    _k.block_extrema(xs, block, bxmax, bxmin)
    _k.block_extrema(ys, block, bymax, bymin)
    phases = np.zeros(len(square_ids), dtype=np.int64)
    _k.count_visit_phases(xs, ys, sq_sorted, time_sorted, entry_off,
                          square_ids, k_phases, _S0_HALF, n_level, j_level,
                          bxmax, bxmin, bymax, bymin, block, phases)
    return phases


def _square_reachable(scene, square_ids, n_level, attach_traces):
    """Which level-n squares are *not* disconnected from the far field.

    One raster over the window [-3/16, 3/16]^2 at cell 2^{-n-2}; a square
    survives iff some free cell of its 4x4 block plus a one-cell ring is
    flood-reachable from the window frame.
    """
    half_w = 3.0 * _S0_HALF
    h = 2.0 ** (-n_level - 2)
    ng = int(round(2 * half_w / h))
    grid = np.zeros(ng * ng, dtype=np.uint8)
    inv_h = 1.0 / h
    for t in attach_traces:
        _k.mark_polyline(np.ascontiguousarray(t[:, 0]),
                         np.ascontiguousarray(t[:, 1]),
                         grid, -half_w, -half_w, inv_h, ng, ng)
    reach = np.zeros(ng * ng, dtype=np.uint8)
    stack = np.empty(ng * ng, dtype=np.int32)
    _k.exterior_reachable(grid, reach, stack, ng, ng)
    reach2 = reach.reshape(ng, ng).astype(bool)
    nside = 1 << (n_level - 3)  # squares per side in S_0
    ok = np.zeros(len(square_ids), dtype=bool)
    # offset of S_0 inside the window, in cells
    off = int(round((half_w - _S0_HALF) / h))
    for si, q in enumerate(square_ids):
        ix = int(q) // nside
        iy = int(q) - ix * nside
        a = off + 4 * ix - 1
        b = off + 4 * iy - 1
        blockr = reach2[max(0, a):a + 6, max(0, b):b + 6]
        ok[si] = bool(blockr.any())
    return ok


def count_kn_squares(j, n_values, k, scene: KnScene) -> SquareCountReport:
    """Count the level-n squares of S_0 with k separated visits that stay
    connected to the far field, for each n, and fit a box-counting slope.

    A square S counts when the trace enters S at least k times, with
    consecutive counted visits separated by an excursion to distance
    2^{-j} from S's center, and the trace (with its attached clusters)
    does not disconnect S from the boundary of the window around S_0.
    """
    if j < 4:
        raise ValueError(f"j must be >= 4, got {j}")
    n_values = list(n_values)
    if any(n < j + 4 for n in n_values):
        raise ValueError(f"every n must be >= j + 4 = {j + 4}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    nmax = max(n_values)
    # resolution guards: the disconnection raster must resolve 2^{-n-1}
    # (cell below is 2^{-n-2}, so this binds only if someone loosens it),
    # and the trace vertices must resolve the level-n squares themselves.
    if 2.0 ** (-nmax - 2) > 2.0 ** (-nmax - 1):
        raise CampaignError("raster cell exceeds 2^-(n+1)")
    d = np.diff(scene.trace, axis=0)
    rms = float(np.sqrt((d * d).sum(axis=1).mean()))
    if rms > 2.0 ** (-nmax):
        raise CampaignError(
            f"trace rms step {rms:.3g} exceeds the level-{nmax} square "
            f"side {2.0 ** (-nmax):.3g}; sample the scene with smaller dt")
    attach = [scene.trace] + [np.asarray(lp.trace) for lp in scene.soup]
    counts = []
    visited = []
    for n in n_values:
        xs, ys, sq, tm, off, ids = _entries_by_square(scene.trace, n)
        visited.append(len(ids))
        if len(ids) == 0:
            counts.append(0)
            continue
        phases = _phase_counts(xs, ys, sq, tm, off, ids, k, n, j)
        cand = ids[phases >= k]
        if cand.size == 0:
            counts.append(0)
            continue
        ok = _square_reachable(scene, cand, n, attach)
        counts.append(int(ok.sum()))
    # box-counting fit: log2 counts vs n (unweighted least squares)
    ns = np.array(n_values, dtype=float)
    cs = np.array(counts, dtype=float)
    good = cs > 0
    if good.sum() >= 2 and np.ptp(ns[good]) > 0:
        y = np.log2(cs[good])
        A = np.vstack([ns[good], np.ones(good.sum())]).T
        coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
        dim = float(coef[0])
        dof = good.sum() - 2
        if dof > 0 and res.size:
            sxx = ((ns[good] - ns[good].mean()) ** 2).sum()
            stderr = math.sqrt(res[0] / dof / sxx)
        else:
            stderr = math.inf
    else:
        dim, stderr = math.nan, math.inf
    for n, cnt in zip(n_values, counts):
        if cnt > 2 ** (2 * (n - 3)):
            raise CampaignError("count exceeds the number of level-n squares")
    return SquareCountReport(j=j, n_values=n_values, counts=counts,
                             dimension=dim, stderr=stderr, visited=visited)


def probe_mid_squares(j, n, k, scene: KnScene, max_probes=64):
    """(hits, total) over a fixed grid of probe squares in the middle
    quarter of S_0: a hit means the trace completes k separated visits of
    the probe square.  Used for the n^{-k} visit-probability scaling."""
    xs, ys, sq, tm, off, ids = _entries_by_square(scene.trace, n)
    nside = 1 << (n - 3)
    lo, hi = nside // 4, 3 * nside // 4  # middle half per axis
    stride = max(1, (hi - lo) // int(math.isqrt(max_probes)))
    probes = [ix * nside + iy
              for ix in range(lo, hi, stride)
              for iy in range(lo, hi, stride)]
    probe_arr = np.array(sorted(probes), dtype=np.int64)
    pos = np.searchsorted(ids, probe_arr)
    hits = 0
    present = []
    for p, q in zip(pos, probe_arr):
        if p < len(ids) and ids[p] == q:
            present.append(q)
    if present:
        present = np.array(present, dtype=np.int64)
        sel = np.searchsorted(ids, present)
        sub_ids = ids[sel]
        # regroup entries for just the probe squares
        offs = [off[s] for s in sel]
        ends = [off[s + 1] for s in sel]
        sq2 = np.concatenate([sq[a:b] for a, b in zip(offs, ends)])
        tm2 = np.concatenate([tm[a:b] for a, b in zip(offs, ends)])
        off2 = np.concatenate([[0], np.cumsum([b - a for a, b in
                                               zip(offs, ends)])]).astype(np.int64)
        phases = _phase_counts(xs, ys, sq2, tm2, off2, sub_ids, k, n, j)
        hits = int((phases >= k).sum())
    return hits, len(probe_arr)


# ---------------------------------------------------------------------------
# FKG harness
# ---------------------------------------------------------------------------


def _check_decreasing(event, soups, extra_loops):
    for soup, extra in zip(soups, extra_loops):
        if not event(soup) and event(soup + [extra]):
            raise MonotonicityError(
                "adding a loop flipped the event false -> true; "
                "fkg_check requires decreasing events")


def fkg_check(event_a, event_b, soup_config: SoupConfig, trials,
              harness_samples=32):
    """Positive association of two decreasing soup events.

    Both events are callables soup -> bool that must be nonincreasing in
    the loop collection; the harness probes this on ``harness_samples``
    soups by adding one extra loop and raises MonotonicityError on a
    false -> true flip.  Returns True iff
    P(A and B) >= P(A) P(B) - 3 * stderr(cov estimate).
    """
    soup_config.validate()
    if trials < 100:
        raise ValueError(f"trials must be >= 100, got {trials}")
    rng = stream_rng(soup_config.seed, 0)
    probes = [sample_loop_soup(soup_config, rng)
              for _ in range(harness_samples)]
    extras = []
    donor = replace(soup_config, c=max(soup_config.c, 0.5))
    while len(extras) < harness_samples:
        one = sample_loop_soup(donor, rng)
        extras.extend(one[:harness_samples - len(extras)])
    _check_decreasing(event_a, probes, extras)
    _check_decreasing(event_b, probes, extras)
    xa = np.empty(trials, dtype=bool)
    xb = np.empty(trials, dtype=bool)
    for t in range(trials):
        soup = sample_loop_soup(soup_config, stream_rng(soup_config.seed,
                                                        1000 + t))
        xa[t] = event_a(soup)
        xb[t] = event_b(soup)
    pa = xa.mean()
    pb = xb.mean()
    pab = (xa & xb).mean()
    # delta-method variance of pab - pa*pb
    g = (xa & xb).astype(float) - pb * xa - pa * xb
    se = math.sqrt(max(g.var(ddof=1), 1e-300) / trials)
    return bool(pab >= pa * pb - 3.0 * se)
