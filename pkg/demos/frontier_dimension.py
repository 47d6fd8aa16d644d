"""Box-counting the multiple points of the Brownian boundary.

Samples loops conditioned to meet the reference square, counts the
dyadic squares receiving k separated visits that stay connected to the
far field, and fits the box-counting dimension.  At k=1 these are
frontier squares and the estimate should approach 4/3 = 2 - xi(0, 2).
"""

import numpy as np

from loopsoup.campaigns import count_kn_squares, sample_kn_scene
from loopsoup.formulas import xi
from loopsoup.paths import stream_rng

N_LIST = [8, 9, 10, 11]
SCENES = 6


def main():
    for k in (1, 2):
        counts = np.zeros(len(N_LIST), dtype=np.int64)
        for s in range(SCENES):
            scene = sample_kn_scene(stream_rng(100 + k, s))
            counts += np.array(count_kn_squares(4, N_LIST, k, scene).counts)
        dim = np.polyfit(np.asarray(N_LIST, float),
                         np.log2(counts.astype(float)), 1)[0]
        oracle = max(2.0 - xi(0.0, 2.0 * k), 0.0)
        print(f"k={k}: counts {counts.tolist()} over n={N_LIST} -> "
              f"dimension {dim:.3f} (predicted {oracle:.3f})")


if __name__ == "__main__":
    main()
