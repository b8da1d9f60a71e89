"""Baseline and sliced LMH on a mixture model: same chain, different cost.

    python3 demos/lmh_speedup.py [n_points] [steps]
"""

import sys
import time

from artifact import corpus
from artifact.inference.lmh import LMH, FactoredLMH


def main(size=100, steps=5000):
    for name in ("gmm_fixed", "linear_regression"):
        m = corpus.load(name, size)
        runs = {}
        for cls in (LMH, FactoredLMH):
            eng = cls(m, seed=1)
            t0 = time.perf_counter()
            trace = eng.run(steps)
            runs[cls.__name__] = (time.perf_counter() - t0, trace, eng.latent)
        (ta, sa, la), (tb, sb, lb) = runs["LMH"], runs["FactoredLMH"]
        same = la == lb and [s.accepted for s in sa] == [s.accepted for s in sb]
        print("%-18s baseline %6.2fs  sliced %6.2fs  speed-up %5.2f  same chain: %s"
              % (name, ta, tb, ta / tb, same))
    print("\nthe mixture proposal touches one point; the regression's parameters touch all of them")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
