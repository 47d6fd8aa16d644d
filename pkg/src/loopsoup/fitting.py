"""Exponent extraction from per-radius survival estimates.

Given (r_i, p_i) with p_i ~ exp(-xi r_i + const), fit a line to
(r_i, -log p_i) by weighted least squares.  Variances of the raw
estimates propagate to the log scale by the delta method,
Var(-log p) ~ Var(p) / p^2, and the weights are the resulting inverse
variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExponentFit", "FitError", "fit_exponent", "binomial_points"]

_EPS_VAR = 1e-30  # floor on log-scale variance so exact inputs still fit


class FitError(ValueError):
    pass


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    stderr: float
    per_radius: list = field(default_factory=list)
    attrition: dict = field(default_factory=dict)  # per-radius failed trials


def binomial_points(radii, successes, trials):
    """(r, p_hat, Var(p_hat)) triples from per-radius binomial tallies."""
    pts = []
    for r, k, n in zip(radii, successes, trials):
        if n <= 0:
            raise FitError(f"trials must be positive at r={r}")
        p = k / n
        pts.append((float(r), float(p), float(p * (1.0 - p) / n)))
    return pts


def fit_exponent(points, drop_smallest=False):
    """WLS fit of -log(estimate) against r over (r, estimate, variance).

    ``drop_smallest`` discards the smallest-r point before fitting (guard
    against small-r lattice transients).  Needs >= 3 usable points with
    positive estimates; raises FitError otherwise, and also when all radii
    coincide (singular design).
    """
    pts = [(float(r), float(e), float(v)) for (r, e, v) in points]
    if drop_smallest:
        if len(pts) < 4:
            raise FitError("drop_smallest needs >= 4 points")
        pts = sorted(pts, key=lambda t: t[0])[1:]
    if len(pts) < 3:
        raise FitError(f"need >= 3 points, got {len(pts)}")
    r = np.array([p[0] for p in pts])
    est = np.array([p[1] for p in pts])
    var = np.array([p[2] for p in pts])
    if (est <= 0).any():
        raise FitError("estimates must be positive for the log transform")
    if (var < 0).any():
        raise FitError("variances must be nonnegative")
    if np.ptp(r) == 0:
        raise FitError("all radii equal: singular design")
    y = -np.log(est)
    logvar = np.maximum(var / est**2, _EPS_VAR)  # delta method
    w = 1.0 / logvar
    sw = w.sum()
    rbar = (w * r).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (r - rbar) ** 2).sum()
    if sxx <= 0:
        raise FitError("singular design in weighted coordinates")
    slope = (w * (r - rbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * rbar
    stderr = math.sqrt(1.0 / sxx)
    return ExponentFit(slope=float(slope), intercept=float(intercept),
                       stderr=float(stderr), per_radius=list(points))
