"""Small disconnection-exponent campaign at desk scale.

Estimates the probability that k Brownian crossings of the annulus
A(0, r) leave the inner circle connected to the frame, fits the decay
exponent, and compares against the closed-form oracle.  Runs in a couple
of minutes; the acceptance suite runs the same campaigns at much larger
trial counts.
"""

import time

from loopsoup.campaigns import CampaignSpec, estimate_p0
from loopsoup.formulas import xi


def main():
    radii = [2.0, 2.5, 3.0, 3.5, 4.0]
    for k in (1, 2):
        t0 = time.time()
        spec = CampaignSpec(c=0.0, k=k, radii=radii, trials_per_radius=2000,
                            grid_n=256, seed=2024, drop_smallest=True)
        fit = estimate_p0(spec)
        oracle = xi(0.0, float(k))
        z = abs(fit.slope - oracle) / max(fit.stderr, 1e-12)
        print(f"k={k}: xi_hat = {fit.slope:.4f} +- {fit.stderr:.4f}   "
              f"oracle xi(0,{k}) = {oracle:.4f}   z = {z:.2f}   "
              f"[{time.time() - t0:.0f}s]")
        for r, p, trials, succ in fit.per_radius:
            print(f"    r={r:3.1f}  p_hat={p:8.5f}  ({succ}/{trials})")
        print()


if __name__ == "__main__":
    main()
