#!/usr/bin/env python3
"""Run efficiency studies from JSON configs and print method-by-m efficiency grids.

Configs with a "dataset" key go through the evidence runner, the rest through
the synthetic-integrand runner.

    python scripts/reproduce.py scripts/configs/phi_d3.json --replicates 10
"""
import argparse
import json
import logging
import time
from pathlib import Path

from cvmc.harness import BayesConfig, ExperimentConfig, run_bayes, run_experiment


def efficiency_grid(report) -> str:
    ms = report.ms
    rows = [f"{'':<10}" + "".join(f"{m:>11}" for m in ms)]
    for method in dict.fromkeys(r.method for r in report.results):
        if method in ("mc", "halton"):
            rows.append(f"{method:<10}{report.efficiency(method, 0):>11.3g}")
            continue
        rows.append(f"{method:<10}" + "".join(f"{report.efficiency(method, m):>11.3g}" for m in ms))
    return "\n".join(rows)


def run_one(path: Path, args) -> None:
    with open(path) as fh:
        obj = json.load(fh)
    if args.replicates:
        obj["replicates"] = args.replicates
    if args.output_root:
        obj["output"] = str(Path(args.output_root) / path.stem)
    t0 = time.perf_counter()
    if "dataset" in obj:
        report = run_bayes(BayesConfig.from_dict(obj), workers=args.threads)
        print(f"{path.stem}: gold rel. s.e. {report.extra['gold_rel_se']:.3g}")
    else:
        report = run_experiment(ExperimentConfig.from_dict(obj), workers=args.threads)
    print(f"{path.stem} ({obj['replicates']} replicates, {time.perf_counter() - t0:.0f}s)")
    print(efficiency_grid(report))
    print()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("configs", nargs="+", type=Path)
    ap.add_argument("--replicates", type=int, help="override the replicate count")
    ap.add_argument("--output-root", help="write each report under this directory")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for path in args.configs:
        run_one(path, args)


if __name__ == "__main__":
    main()
