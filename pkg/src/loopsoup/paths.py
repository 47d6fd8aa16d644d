"""Samplers for every random object in the laboratory.

Brownian loop soups under the cutoff loop measure, Brownian crossings of
annuli, and annulus excursions via the Bessel-3 skew product.  Everything
is driven by numpy Generators; campaigns that need throughput use the
compiled kernels in :mod:`._kernels` instead, with the same laws.

Conventions: C_u denotes the circle of radius e^u centered at the origin,
A(s, r) the closed annulus between C_s and C_r, B_r the ball bounded by
C_r.  Soup intensity c uses the normalization in which the root measure
of loops rooted in a region of area A with durations in [t_min, t_max]
has mass c * A * (1/(2*pi)) * (1/t_min - 1/t_max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SoupConfig",
    "LoopSample",
    "CrossingSample",
    "ExcursionSample",
    "Rect",
    "Disk",
    "Annulus",
    "sample_loop_soup",
    "restrict_soup",
    "sample_crossing",
    "sample_excursion",
    "sample_excursion_last_exit",
    "loop_mass_above_diameter",
    "stream_rng",
]

TWO_PI = 2.0 * math.pi


def stream_rng(seed, stream):
    """Independent generator for (master seed, stream index).

    Counter-based splitting: every (seed, stream) pair gives a stream that
    is reproducible in isolation, so trials can be sharded arbitrarily.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                                        spawn_key=(int(stream),)))


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self):
        return max(0.0, self.x1 - self.x0) * max(0.0, self.y1 - self.y0)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return ((pts[..., 0] >= self.x0) & (pts[..., 0] <= self.x1)
                & (pts[..., 1] >= self.y0) & (pts[..., 1] <= self.y1))

    def sample(self, rng, n):
        u = rng.random((n, 2))
        return np.column_stack([self.x0 + u[:, 0] * (self.x1 - self.x0),
                                self.y0 + u[:, 1] * (self.y1 - self.y0)])


@dataclass(frozen=True)
class Disk:
    radius: float
    center: tuple = (0.0, 0.0)

    @property
    def area(self):
        return math.pi * self.radius**2

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        return dx * dx + dy * dy <= self.radius**2


@dataclass(frozen=True)
class Annulus:
    """Closed annulus between radii e^s and e^r (log-radius bounds)."""

    s: float
    r: float
    center: tuple = (0.0, 0.0)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        dx = pts[..., 0] - self.center[0]
        dy = pts[..., 1] - self.center[1]
        d2 = dx * dx + dy * dy
        return (d2 >= math.exp(2.0 * self.s)) & (d2 <= math.exp(2.0 * self.r))


class EmptyRegion:
    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape[:-1], dtype=bool)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class LoopSample:
    """One loop of the cutoff soup: a Brownian bridge from root to root."""

    root: tuple
    duration: float
    trace: np.ndarray  # (m, 2), closed: trace[0] == trace[-1] == root
    exits_region: bool = False

    @property
    def bbox(self):
        lo = self.trace.min(axis=0)
        hi = self.trace.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    @property
    def diameter_ub(self):
        """Bounding-box diagonal: an upper bound on the true diameter."""
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)


@dataclass
class SoupConfig:
    """Parameters of a cutoff loop soup in a rectangle."""

    c: float
    region: tuple  # (x0, y0, x1, y1)
    t_min: float
    t_max: float
    dt: float
    seed: int = 0

    def validate(self):
        errs = []
        if not (0.0 <= self.c <= 1.0):
            errs.append(f"c must be in [0, 1], got {self.c}")
        x0, y0, x1, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            errs.append(f"region must be a nonempty rectangle, got {self.region}")
        if not self.t_min > 0:
            errs.append(f"t_min must be positive, got {self.t_min}")
        if not self.t_max > self.t_min:
            errs.append(f"t_max must exceed t_min, got {self.t_max}")
        if not self.dt > 0:
            errs.append(f"dt must be positive, got {self.dt}")
        elif self.t_min > 0 and self.dt > self.t_min / 8 * (1 + 1e-12):
            errs.append(f"dt must be <= t_min/8 so every loop gets >= 8 "
                        f"vertices, got dt={self.dt}, t_min={self.t_min}")
        if errs:
            raise ValueError("invalid SoupConfig: " + "; ".join(errs))

    @property
    def mass(self):
        """Expected loop count: c * Area * (1/t_min - 1/t_max) / (2 pi)."""
        x0, y0, x1, y1 = self.region
        area = (x1 - x0) * (y1 - y0)
        return self.c * area * (1.0 / self.t_min - 1.0 / self.t_max) / TWO_PI


@dataclass
class CrossingSample:
    """k independent Brownian paths from uniform points on C_0 to C_r."""

    k: int
    r: float
    paths: list  # k arrays of shape (m_i, 2)


@dataclass
class ExcursionSample:
    """Excursion across A(s, r): starts on C_s, never re-enters B_s, ends
    on C_r.  `times` carries the skew-product clock H (trapezoid rule at
    the path's own resolution); it re-parametrizes but does not alter the
    trace."""

    s: float
    r: float
    trace: np.ndarray  # (m, 2)
    times: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# Loop soup
# ---------------------------------------------------------------------------


def _bridge(rng, root, duration, nsteps):
    """Closed Brownian bridge with nsteps increments (nsteps+1 vertices)."""
    dtl = duration / nsteps
    g = rng.standard_normal((nsteps, 2)) * math.sqrt(dtl)
    w = np.vstack([[0.0, 0.0], np.cumsum(g, axis=0)])
    frac = (np.arange(nsteps + 1) / nsteps)[:, None]
    return np.asarray(root, dtype=float) + w - frac * w[-1]


def _sample_durations(rng, n, t_min, t_max):
    """Durations with density proportional to t^-2 on [t_min, t_max]."""
    u = rng.random(n)
    return t_min / (1.0 - u * (1.0 - t_min / t_max))


def sample_loop_soup(cfg: SoupConfig, rng=None):
    """Sample the cutoff loop soup in cfg.region.

    Count ~ Poisson(cfg.mass); roots uniform in the region; durations with
    density ~ t^-2 on [t_min, t_max]; traces are Brownian bridges at time
    step ~cfg.dt.  Loops whose trace exits the region are kept and flagged
    (restriction, when wanted, is applied downstream by restrict_soup).
    """
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.c == 0.0:
        return []
    x0, y0, x1, y1 = cfg.region
    rect = Rect(x0, y0, x1, y1)
    n = rng.poisson(cfg.mass)
    roots = rect.sample(rng, n)
    durations = _sample_durations(rng, n, cfg.t_min, cfg.t_max)
    loops = []
    for i in range(n):
        t = durations[i]
        nsteps = max(8, int(math.ceil(t / cfg.dt)))
        trace = _bridge(rng, roots[i], t, nsteps)
        exits = not bool(rect.contains(trace).all())
        loops.append(LoopSample(root=(roots[i, 0], roots[i, 1]),
                                duration=float(t), trace=trace,
                                exits_region=exits))
    return loops


def restrict_soup(loops, subregion):
    """Loops whose full trace lies in subregion (Lambda_r-style restriction).

    By the Poisson restriction property the result is again a loop soup in
    the subregion.  ``subregion`` is any object with a vectorized
    ``contains(points)`` (Rect, Disk, Annulus, ...).
    """
    return [lp for lp in loops if bool(subregion.contains(lp.trace).all())]


# ---------------------------------------------------------------------------
# Crossings
# ---------------------------------------------------------------------------

_CHUNK = 4096


def sample_crossing(k, r, dt_spatial, rng):
    """k independent Brownian paths from uniform points on C_0, each run
    until first exit of B_r, discretized so per-step displacement equals
    ``dt_spatial`` (fixed step length; direction isotropic).
    """
    if r < 0.5:
        raise ValueError(f"r must be >= 1/2, got {r}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rho = math.exp(r)
    paths = []
    for _ in range(k):
        a0 = rng.random() * TWO_PI
        pos = np.array([math.cos(a0), math.sin(a0)])
        pieces = [pos[None, :]]
        while True:
            ang = rng.random(_CHUNK) * TWO_PI
            steps = dt_spatial * np.column_stack([np.cos(ang), np.sin(ang)])
            pts = pos + np.cumsum(steps, axis=0)
            rad = np.hypot(pts[:, 0], pts[:, 1])
            hit = np.nonzero(rad >= rho)[0]
            if hit.size:
                j = hit[0]
                prev = pts[j - 1] if j > 0 else pos
                rp = math.hypot(prev[0], prev[1])
                rq = rad[j]
                f = (rho - rp) / (rq - rp) if rq > rp else 1.0
                end = prev + np.clip(f, 0.0, 1.0) * (pts[j] - prev)
                pieces.append(pts[:j])
                pieces.append(end[None, :])
                break
            pieces.append(pts)
            pos = pts[-1]
        paths.append(np.vstack(pieces))
    return CrossingSample(k=k, r=r, paths=paths)


# ---------------------------------------------------------------------------
# Excursions
# ---------------------------------------------------------------------------


def _bessel3_skew(rng, s, r, step):
    """(u, theta) trace of the Bessel-3 skew product, step = log-plane
    increment scale.  Returns arrays (u, theta) with u[0]=s, u[-1]=r."""
    w = np.array([max(s, 1e-12), 0.0, 0.0])
    th0 = rng.random() * TWO_PI
    us = [np.array([s])]
    ths = [np.array([th0])]
    ell3 = step * math.sqrt(3.0)
    while True:
        g = rng.standard_normal((_CHUNK, 3)) * ell3 / math.sqrt(3.0)
        w3 = w + np.cumsum(g, axis=0)
        u = np.sqrt((w3 * w3).sum(axis=1))
        dth = rng.standard_normal(_CHUNK) * step
        th = ths[-1][-1] + np.cumsum(dth)
        hit = np.nonzero(u >= r)[0]
        if hit.size:
            j = hit[0]
            up = us[-1][-1] if j == 0 else u[j - 1]
            f = (r - up) / (u[j] - up) if u[j] > up else 1.0
            thp = ths[-1][-1] if j == 0 else th[j - 1]
            the = thp + np.clip(f, 0.0, 1.0) * (th[j] - thp)
            us.append(u[:j])
            ths.append(th[:j])
            us.append(np.array([r]))
            ths.append(np.array([the]))
            break
        us.append(u)
        ths.append(th)
        w = w3[-1]
    return np.concatenate(us), np.concatenate(ths)


def sample_excursion(s, r, rng, step=0.01):
    """Excursion across A(s, r) via the Bessel-3 skew product.

    log-radius = modulus of a 3-component Brownian increment process
    started on the radius-s sphere (so the excursion never re-enters the
    interior of B_s), angle = independent Brownian motion started uniform
    on [0, 2 pi), on the same clock.  The skew-product time change
    H(t) = integral of exp(2 u) is accumulated by the trapezoid rule into
    ``times`` (it only re-parametrizes; the trace is exact in law at the
    step scale).
    """
    if not r > s:
        raise ValueError(f"need r > s, got s={s}, r={r}")
    u, th = _bessel3_skew(rng, s, r, step)
    trace = np.column_stack([np.exp(u) * np.cos(th), np.exp(u) * np.sin(th)])
    # physical time per log-plane time h is e^{2u}; trapezoid in h = step^2
    w = np.exp(2.0 * u)
    dt_phys = 0.5 * (w[1:] + w[:-1]) * step * step
    times = np.concatenate([[0.0], np.cumsum(dt_phys)])
    return ExcursionSample(s=s, r=r, trace=trace, times=times)


def sample_excursion_last_exit(s, r, rng, step=0.01):
    """Excursion as the post-last-exit segment of a Brownian motion.

    Reference implementation of the alternative definition: run a Brownian
    motion (in log-polar coordinates, which preserves the trace law) from
    C_s to C_r and keep the part after its last visit to C_s.  Used to
    cross-validate :func:`sample_excursion`.
    """
    if not r > s:
        raise ValueError(f"need r > s, got s={s}, r={r}")
    u0 = s
    th0 = rng.random() * TWO_PI
    us = [np.array([u0])]
    ths = [np.array([th0])]
    while True:
        du = rng.standard_normal(_CHUNK) * step
        dth = rng.standard_normal(_CHUNK) * step
        u = us[-1][-1] + np.cumsum(du)
        th = ths[-1][-1] + np.cumsum(dth)
        hit = np.nonzero(u >= r)[0]
        if hit.size:
            j = hit[0]
            us.append(u[:j + 1])
            ths.append(th[:j + 1])
            break
        us.append(u)
        ths.append(th)
    u = np.concatenate(us)
    th = np.concatenate(ths)
    u[-1] = r
    below = np.nonzero(u <= s)[0]
    start = below[-1] if below.size else 0
    u = u[start:].copy()
    th = th[start:]
    u[0] = s  # clip the straddling vertex onto C_s
    trace = np.column_stack([np.exp(u) * np.cos(th), np.exp(u) * np.sin(th)])
    return ExcursionSample(s=s, r=r, trace=trace)


# ---------------------------------------------------------------------------
# Loop-measure thinness probe
# ---------------------------------------------------------------------------


def loop_mass_above_diameter(R, window, t_min=1e-3, t_max=100.0,
                             n_samples=20000, seed=0, dt=None):
    """Monte Carlo estimate of the cutoff loop-measure mass of loops that
    meet the unit disk and have diameter >= R.

    Samples n_samples loops from the normalized cutoff measure over the
    ``window`` rectangle and rescales by the total mass.  Finite and
    decreasing in R by construction; stabilizes as t_max grows because the
    t^-2 density makes huge loops rare.
    """
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    if dt is None:
        dt = t_min / 8.0
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = window
    rect = Rect(x0, y0, x1, y1)
    area = rect.area
    mass = area * (1.0 / t_min - 1.0 / t_max) / TWO_PI
    roots = rect.sample(rng, n_samples)
    durations = _sample_durations(rng, n_samples, t_min, t_max)
    hits = 0
    for i in range(n_samples):
        t = durations[i]
        # cheap prefilter: a bridge of duration t has diameter beyond
        # 8 sqrt(t) only with negligible probability; skip hopeless loops
        if 8.0 * math.sqrt(t) < R:
            continue
        nsteps = max(8, min(int(math.ceil(t / dt)), 65536))
        trace = _bridge(rng, roots[i], t, nsteps)
        lo = trace.min(axis=0)
        hi = trace.max(axis=0)
        diam = math.hypot(hi[0] - lo[0], hi[1] - lo[1])
        if diam < R:
            continue
        d2 = (trace * trace).sum(axis=1)
        if (d2 <= 1.0).any():
            hits += 1
    return mass * hits / n_samples
