"""Particle filtering by re-running versus resuming paused particles.

    python3 demos/smc_iterative.py [n_points] [particles]
"""

import sys
import time

from artifact import corpus
from artifact.inference.smc import smc_iterative, smc_naive


def main(size=50, particles=100):
    for name in ("hmm", "gmm_fixed"):
        m = corpus.load(name, size)
        t0 = time.perf_counter()
        a = smc_naive(m, particles, seed=0)
        t1 = time.perf_counter()
        b = smc_iterative(m, particles, seed=0)
        t2 = time.perf_counter()
        equal = [s.increments for s in a.steps] == [s.increments for s in b.steps]
        print("%-10s log evidence %10.4f  naive %5.2fs  iterative %5.2fs  identical weights: %s"
              % (name, b.log_evidence, t1 - t0, t2 - t1, equal))


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
