"""Closed-form exponent and dimension formulas for 2D Brownian loop soups.

All the analytic values the Monte Carlo estimators are checked against live
here: the intensity <-> SLE-parameter correspondence, the generalized
disconnection/intersection exponent, and the predicted Hausdorff dimensions
of cluster-boundary simple/double points.

Conventions: the soup intensity is ``c`` in [0, 1] (c = 0 is the pure
Brownian limit, c = 1 the critical soup), and ``kappa`` in [8/3, 4] is the
corresponding loop-ensemble parameter.

All functions are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "kappa_of_c",
    "c_of_kappa",
    "xi",
    "xi_validity_threshold",
    "eta_kappa",
    "predicted_dimensions",
    "Dimensions",
]


def _check_intensity(c: float) -> None:
    if not (0.0 <= c <= 1.0) or math.isnan(c):
        raise ValueError(f"intensity c must lie in [0, 1], got {c!r}")


def kappa_of_c(c: float) -> float:
    """Loop-ensemble parameter kappa for soup intensity c.

    kappa(c) = (13 - c - sqrt((1-c)(25-c))) / 3, mapping [0, 1] onto
    [8/3, 4].  Inverse of :func:`c_of_kappa`.
    """
    _check_intensity(c)
    return (13.0 - c - math.sqrt((1.0 - c) * (25.0 - c))) / 3.0


def c_of_kappa(kappa: float) -> float:
    """Soup intensity c for loop-ensemble parameter kappa in [8/3, 4].

    c(kappa) = (6 - kappa)(3 kappa - 8) / (2 kappa).
    """
    if not (8.0 / 3.0 - 1e-15 <= kappa <= 4.0 + 1e-15) or math.isnan(kappa):
        raise ValueError(f"kappa must lie in [8/3, 4], got {kappa!r}")
    c = (6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa)
    # kappa at the interval edges maps exactly to 0 and 1; clip rounding dust
    return min(1.0, max(0.0, c))


def xi_validity_threshold(c: float) -> float:
    """Smallest beta for which the exponent formula is valid: (6-k)/(2k)."""
    k = kappa_of_c(c)
    return (6.0 - k) / (2.0 * k)


def xi(c: float, beta: float) -> float:
    """Generalized disconnection exponent xi_c(beta).

    xi_c(beta) = ((sqrt(24 beta + 1 - c) - sqrt(1-c))^2 - 4(1-c)) / 48.

    Evaluated in the factored form (a - 3b)(a + b)/48 with
    a = sqrt(24 beta + 1 - c), b = sqrt(1 - c), which has no catastrophic
    cancellation anywhere on the validity range (a = 3b would require
    beta = (1-c)/3, below the validity threshold).

    Special values: xi_0(1) = 1/4, xi_0(2) = 2/3 (Brownian frontier),
    xi_1(beta) = beta/2.
    """
    _check_intensity(c)
    thr = xi_validity_threshold(c)
    if beta < thr - 1e-12:
        raise ValueError(
            f"beta={beta} below validity threshold {thr:.6f} for c={c}"
        )
    a = math.sqrt(24.0 * beta + 1.0 - c)
    b = math.sqrt(1.0 - c)
    return (a - 3.0 * b) * (a + b) / 48.0


def eta_kappa(kappa: float, beta: float) -> float:
    """Generalized disconnection exponent in the kappa parametrization.

    eta_kappa(beta) = ((sqrt(16 beta kappa + (4-kappa)^2) - (4-kappa))^2
                       - 4 (4-kappa)^2) / (32 kappa),
    valid for kappa in (0, 4], beta >= (6-kappa)/(2 kappa).  On
    kappa in [8/3, 4] it coincides with xi(c_of_kappa(kappa), beta).
    """
    if not (0.0 < kappa <= 4.0 + 1e-15) or math.isnan(kappa):
        raise ValueError(f"kappa must lie in (0, 4], got {kappa!r}")
    if beta < (6.0 - kappa) / (2.0 * kappa) - 1e-12:
        raise ValueError(
            f"beta={beta} below validity threshold for kappa={kappa}"
        )
    d = 4.0 - kappa
    a = math.sqrt(16.0 * beta * kappa + d * d)
    # ((a - d)^2 - 4 d^2) / (32 k) = (a - 3d)(a + d) / (32 k)
    return (a - 3.0 * d) * (a + d) / (32.0 * kappa)


@dataclass(frozen=True)
class Dimensions:
    """Predicted Hausdorff dimensions for a soup of intensity c.

    d0: outer boundary of a cluster, 1 + kappa(c)/8.
    d1: simple points on cluster boundaries, 2 - xi_c(2).
    d2: double points on cluster boundaries, 2 - xi_c(4), clamped at 0.
    """

    c: float
    d0: float
    d1: float
    d2: float
    d2_clamped: bool


def predicted_dimensions(c: float) -> Dimensions:
    """Boundary, simple-point and double-point dimensions at intensity c.

    d2 is clamped to 0 when 2 - xi_c(4) is negative (this only happens at
    the boundary case c = 1 where the true value is exactly 0, up to
    rounding); the clamp is reported via ``d2_clamped``.
    """
    _check_intensity(c)
    d0 = 1.0 + kappa_of_c(c) / 8.0
    d1 = 2.0 - xi(c, 2.0)
    d2_raw = 2.0 - xi(c, 4.0)
    clamped = d2_raw < 0.0
    return Dimensions(c=c, d0=d0, d1=d1, d2=max(d2_raw, 0.0), d2_clamped=clamped)
