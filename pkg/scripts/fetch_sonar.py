#!/usr/bin/env python3
"""Download the sonar (mines vs rocks) data to data/sonar.all-data and check it parses."""
import argparse
import urllib.request
from pathlib import Path

from cvmc.integrands import load_sonar

URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/"
       "undocumented/connectionist-bench/sonar/sonar.all-data")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", type=Path, default=Path("data/sonar.all-data"))
    ap.add_argument("--url", default=URL)
    args = ap.parse_args()
    args.dest.parent.mkdir(parents=True, exist_ok=True)
    urllib.request.urlretrieve(args.url, args.dest)
    data = load_sonar(args.dest)
    print(f"{args.dest}: {data.X.shape[0]} rows, {int((data.y > 0).sum())} mines")


if __name__ == "__main__":
    main()
