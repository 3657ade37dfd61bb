#!/usr/bin/env python3
"""Number of tensor-product controls by degree threshold, for a few (d, k) pairs."""
import argparse

from cvmc.basis import count_indices
from cvmc.harness import build_interaction_basis


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degs", type=int, nargs="+", default=[1, 3, 5, 10, 12])
    ap.add_argument("--pairs", nargs="+", default=["3:12", "5:10", "8:3"], help="d:k pairs")
    args = ap.parse_args()
    print(f"{'d':>3}{'k':>4}" + "".join(f"{g:>9}" for g in args.degs))
    for pair in args.pairs:
        d, k = map(int, pair.split(":"))
        print(f"{d:>3}{k:>4}" + "".join(f"{count_indices(d, k, g):>9}" for g in args.degs))
    print("\ninteraction bases used for the evidence studies")
    for label, d, k, order, degs in (("capture", 12, 10, 2, [2, 4, 6, 10, 15]),
                                     ("sonar", 61, 20, 1, [1, 3, 5, 10, 20])):
        ms = [build_interaction_basis(d, k, order, g).m for g in degs]
        print(f"{label:<8} d={d} k={k} order={order}: " + ", ".join(f"deg {g} -> {m}" for g, m in zip(degs, ms)))


if __name__ == "__main__":
    main()
