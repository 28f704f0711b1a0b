#!/usr/bin/env python3
"""Root-finding calibration of the preset intercepts.

The n >= 100 suites specify their networks by average degree rather than by
an intercept value.  This script solves E[sigma(beta - D^2)] = degree/(n-1)
for beta, where D^2 is the squared distance between two independent draws
from the initial mixture, and prints the values frozen into
``dynlat.simulate``.  Monte-Carlo integration with a fixed seed; brentq on
the smooth monotone density curve.
"""

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

N_MC = 2_000_000
SEED = 20240601


def mixture_density(beta: float, offset: float, var: float, rng_seed: int = SEED) -> float:
    rng = np.random.default_rng(rng_seed)
    centers = np.array([[-offset, 0.0], [offset, 0.0]])
    k1 = rng.integers(0, 2, N_MC)
    k2 = rng.integers(0, 2, N_MC)
    x = centers[k1] + np.sqrt(var) * rng.standard_normal((N_MC, 2))
    y = centers[k2] + np.sqrt(var) * rng.standard_normal((N_MC, 2))
    d2 = np.sum((x - y) ** 2, axis=1)
    return float(expit(beta - d2).mean())


def calibrate(target_density: float, offset: float, var: float) -> float:
    return brentq(
        lambda b: mixture_density(b, offset, var) - target_density,
        -15.0,
        8.0,
        xtol=1e-4,
    )


def main():
    print("degree-calibrated intercepts (mixture +-1.5, component var 0.5):")
    for n in (100, 1000):
        for label, degree in [("dense", 7.5), ("moderate", 4.0), ("sparse", 1.8)]:
            beta = calibrate(degree / (n - 1), 1.5, 0.5)
            print(f"  n={n:5d} {label:9s} target degree {degree:4.1f} -> beta = {beta:+.4f}")
    print()
    print("reference densities of the n=50 designs (mixture +-0.5, var 0.5):")
    for beta in (0.5, -0.5, -1.5):
        print(f"  beta={beta:+.1f} -> density {mixture_density(beta, 0.5, 0.5):.4f}")


if __name__ == "__main__":
    main()
