#!/usr/bin/env python3
"""Empirical coverage of the high-probability error bounds on synthetic models.

Each model is a univariate Legendre expansion plus a bounded residual that is
orthogonal to the basis, so every constant in the bounds is known exactly.
"""
import argparse

import numpy as np

from cvmc.basis import BasisSpec
from cvmc.bounds import CoverageModel, empirical_coverage, lslasso_lambda_interval


def models(delta: float) -> dict:
    spec5 = BasisSpec("legendre", 1, 5, 5)
    out = {
        "oracle": CoverageModel(spec5, np.array([1.0, 0.0, -1.0, 0.0, 0.0]), noise_amp=0.1, n=500,
                                delta=delta),
        "ols": CoverageModel(BasisSpec("legendre", 1, 3, 3), np.array([1.0, 0.0, -1.0]), noise_amp=0.1,
                             n=1300, delta=delta),
    }
    beta = np.array([1.0, -1.0, 0.0, 0.0, 0.0])
    probe = CoverageModel(spec5, beta, noise_amp=0.05, n=60_000, N=60_000, delta=delta)
    iv = lslasso_lambda_interval(probe.params())
    out["lslasso"] = CoverageModel(spec5, beta, noise_amp=0.05, n=60_000, N=60_000, delta=delta,
                                   lam=0.5 * (iv.lo + iv.hi))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.2)
    ap.add_argument("--replicates", type=int, default=500)
    ap.add_argument("--seed", type=int, default=707)
    args = ap.parse_args()
    print(f"{'bound':<9}{'value':>11}{'coverage':>10}{'wilson 95%':>20}")
    for op, model in models(args.delta).items():
        res = empirical_coverage(model, op, args.replicates, seed=args.seed)
        print(f"{op:<9}{res.bound:>11.4g}{res.coverage:>10.3f}      [{res.lo:.3f}, {res.hi:.3f}]")
    print(f"target: coverage >= {1 - args.delta:.2f}")


if __name__ == "__main__":
    main()
