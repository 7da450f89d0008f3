"""Empirical channel count against epsilon for d=1, with the pooled log-log slope.

Prints the median n per epsilon and the slope of log n on log(1/eps), which
the Monte Carlo rate puts near 2.

    python scripts/convergence_in_n.py [--seed 0] [--replicates 100]
"""

import argparse

import numpy as np

from kolmonet import rng as rngmod
from kolmonet.verify import CONVERGENCE_EPS, convergence_exponent


def run(seed: int, replicates: int) -> None:
    gen = rngmod.stream(seed, rngmod.VERIFY, "convergence_script")
    slope, medians = convergence_exponent(gen, replicates)
    print("epsilon  median_n")
    for eps, n in zip(CONVERGENCE_EPS, medians):
        print(f"{eps:7.3f}  {n:8.0f}")
    print(f"fitted eps-exponent of n: {slope:.3f} (predicted 2)")
    print(f"n ratio per halving of eps: {np.exp(np.diff(np.log(medians))).round(2).tolist()}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--replicates", type=int, default=100)
    a = ap.parse_args()
    run(a.seed, a.replicates)
