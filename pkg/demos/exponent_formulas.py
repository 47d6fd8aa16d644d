"""Tour of the closed-form exponent formulas.

Walks the loop-soup intensity range c in [0, 1], printing the associated
SLE parameter kappa(c), the generalized disconnection exponents
xi_c(beta) at a few orders, and the predicted fractal dimensions of the
simple, double and triple boundary points of a Brownian path with an
independent soup attached.  Ends with the two structural facts the
formulas encode: xi_c(6) > 2 everywhere (no triple boundary points) and
the exact classical values at c = 0.
"""

import numpy as np

from loopsoup.formulas import (kappa_of_c, predicted_dimensions, xi,
                               xi_validity_threshold)


def main():
    print(f"{'c':>5} {'kappa':>7} {'xi(1)':>7} {'xi(2)':>7} {'xi(4)':>7} "
          f"{'xi(6)':>7} {'d0':>7} {'d1':>7} {'d2':>7}")
    for c in np.linspace(0.0, 1.0, 11):
        k = kappa_of_c(c)
        dims = predicted_dimensions(c)
        print(f"{c:5.2f} {k:7.4f} {xi(c, 1.0):7.4f} {xi(c, 2.0):7.4f} "
              f"{xi(c, 4.0):7.4f} {xi(c, 6.0):7.4f} "
              f"{dims.d0:7.4f} {dims.d1:7.4f} {dims.d2:7.4f}")

    print()
    print("structural checks:")
    worst = min(xi(c, 6.0) for c in np.arange(0.0, 1.0 + 1e-9, 1e-3))
    print(f"  min over c of xi(c, 6) = {worst:.6f}  (> 2: triple boundary "
          f"points have negative dimension at every intensity)")
    print(f"  xi(0, 1) = {xi(0.0, 1.0)}  (classical one-arm value 1/4)")
    print(f"  xi(0, 2) = {xi(0.0, 2.0)}  (Brownian frontier: dimension "
          f"2 - 2/3 = 4/3)")
    print(f"  xi(1, 2) = {xi(1.0, 2.0)}  (at c = 1 the formula collapses "
          f"to beta/2)")
    print(f"  validity: xi(c, beta) needs beta >= (6 - kappa)/(2 kappa); "
          f"at c = 0 that is {xi_validity_threshold(0.0):.4f}")


if __name__ == "__main__":
    main()
