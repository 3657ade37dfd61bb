"""Command-line entry point: ``cvmc {integrate,bench,bayes,bounds}``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import Optional, Sequence

from . import harness
from .basis import BasisSpec, build_design
from .bounds import BoundError, BoundParams, bound_report
from .estimators import (SampleBatch, lasso_estimate, lslasso_estimate, lslassox_subsample,
                         mc_estimate, ols_estimate)
from .integrands import SonarFormatError, make_integrand
from .qmc import halton_points

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def _print_summary(report: harness.ExperimentReport) -> None:
    print(f"{'method':<10}{'m':>7}{'mse':>14}{'efficiency':>12}{'ms/rep':>10}")
    for r in report.results:
        print(f"{r.method:<10}{r.m:>7}{r.mse:>14.4e}{r.efficiency:>12.3f}{r.wall_time_ms:>10.1f}")


def cmd_integrate(args) -> int:
    integrand = make_integrand(args.integrand, args.d, args.j)
    X = harness.sample_uniform(args.d, args.n, args.seed)
    f_vals = integrand(X)
    out = {"integrand": integrand.name, "n": args.n, "method": args.method}
    if args.method == "mc":
        res = mc_estimate(f_vals)
    elif args.method == "halton":
        res = mc_estimate(integrand(halton_points(args.d, args.n)))
    else:
        spec = BasisSpec(args.family, args.d, args.k, args.deg, order=args.order)
        batch = SampleBatch(f_vals, build_design(spec, X), X)
        out["m"] = spec.m
        if args.method == "ols":
            res = ols_estimate(batch)
        elif args.method == "lasso":
            res = lasso_estimate(batch, args.selector)
        else:
            N = args.N
            if N is None:
                if args.method == "lslasso":
                    raise harness.ConfigError("method 'lslasso' needs --N")
                N = lslassox_subsample(args.n)
            res = lslasso_estimate(batch, min(N, args.n), args.selector)
    out.update(res.to_dict())
    out["method"] = args.method
    out.pop("beta", None)
    out["support_size"] = len(out.pop("active_set", []))
    if integrand.true_value is not None:
        out["true_value"] = integrand.true_value
        out["abs_error"] = abs(res.alpha - integrand.true_value)
    _dump(out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = harness.ExperimentConfig.from_json_file(args.config)
    if args.output:
        cfg.output = args.output
    report = harness.run_experiment(cfg, workers=args.threads)
    _print_summary(report)
    return EXIT_OK


def cmd_bayes(args) -> int:
    cfg = harness.BayesConfig(
        dataset=args.dataset, n=args.n, N=args.N, k=args.k, order=args.order, degs=args.deg,
        replicates=args.replicates, master_seed=args.seed, n_gold=args.n_gold,
        gold_seed=args.gold_seed, target=args.target, data_path=args.data_path,
        cache_dir=args.cache_dir, output=args.output,
        **({"methods": args.methods} if args.methods else {}),
    )
    report = harness.run_bayes(cfg, workers=args.threads)
    ex = report.extra
    print(f"gold standard: mean={ex['gold_mean']:.6g} rel_se={ex['gold_rel_se']:.3g} "
          f"n_gold={ex['n_gold']}")
    if not math.isnan(ex["log_evidence_gold"]):
        print(f"log evidence: {ex['log_evidence_gold']:.4f}")
    _print_summary(report)
    return EXIT_OK


def cmd_bounds(args) -> int:
    with open(args.params) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BoundError(f"{args.params}: {exc}") from None
    if not isinstance(obj, dict):
        raise BoundError("bound parameters must be a JSON object")
    _dump(bound_report(BoundParams.from_dict(obj)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cvmc", description="Monte Carlo integration with control variates")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("integrate", help="one-shot estimate of a synthetic integral")
    q.add_argument("--integrand", required=True, help="phi, f1..f3 or g1..g3")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--j", type=int, default=None)
    q.add_argument("--family", default="legendre")
    q.add_argument("--k", type=int, default=6)
    q.add_argument("--deg", type=int, default=6)
    q.add_argument("--order", type=int, default=None)
    q.add_argument("--n", type=int, default=1000)
    q.add_argument("--N", type=int, default=None)
    q.add_argument("--method", default="lslassox",
                   choices=["mc", "halton", "ols", "lasso", "lslasso", "lslassox"])
    q.add_argument("--selector", default="dichotomic", choices=list(harness.SELECTORS))
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(fn=cmd_integrate)

    q = sub.add_parser("bench", help="replicated comparison from a JSON config")
    q.add_argument("config")
    q.add_argument("--output", default=None, help="report directory (overrides the config)")
    q.add_argument("--threads", type=int, default=None, help="defaults to $CVMC_THREADS or 1")
    q.set_defaults(fn=cmd_bench)

    q = sub.add_parser("bayes", help="evidence estimation for the capture or sonar model")
    q.add_argument("--dataset", required=True, choices=["capture", "sonar"])
    q.add_argument("--data-path", default=None)
    q.add_argument("--n", type=int, default=5000)
    q.add_argument("--N", type=int, default=None)
    q.add_argument("--k", type=int, default=10)
    q.add_argument("--order", type=int, default=2)
    q.add_argument("--deg", type=int, nargs="+", default=[6])
    q.add_argument("--methods", nargs="+", default=None)
    q.add_argument("--replicates", type=int, default=100)
    q.add_argument("--n-gold", type=int, default=10**7)
    q.add_argument("--gold-seed", type=int, default=12345)
    q.add_argument("--target", default="evidence", choices=list(harness.BAYES_TARGETS))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--cache-dir", default=None)
    q.add_argument("--output", default=None)
    q.add_argument("--threads", type=int, default=None)
    q.set_defaults(fn=cmd_bayes)

    q = sub.add_parser("bounds", help="evaluate the error bounds for a parameter JSON")
    q.add_argument("params")
    q.set_defaults(fn=cmd_bounds)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (OSError, SonarFormatError) as exc:
        print(f"cvmc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (harness.ConfigError, BoundError, ValueError) as exc:
        print(f"cvmc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
