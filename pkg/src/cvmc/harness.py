"""Replicated experiments: sampling, paired estimation, MSE and efficiency reports.

Every replicate draws one batch of points from its own seeded stream and all
requested methods are evaluated on that same batch.  Results are merged in
replicate order, so the report does not depend on how many worker threads ran.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ._parallel import ordered_map, replicate_seed, thread_cap
from .basis import BasisSpec, Family, build_design
from .estimators import (SampleBatch, lasso_estimate, lslasso_estimate, lslassox_subsample,
                         ols_estimate, select)
from .integrands import (EvidenceModel, Integrand, capture_model, load_sonar, make_integrand,
                         sonar_model)
from .qmc import MAX_DIM as HALTON_MAX_DIM
from .qmc import halton_points

log = logging.getLogger(__name__)

METHODS = ("mc", "halton", "ols", "lasso", "lslasso", "lslassox")
SELECTORS = ("dichotomic", "kfold")


class ConfigError(ValueError):
    pass


def sample_uniform(d: int, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. uniform points on ``[0, 1)^d`` from a PCG64 stream."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    return np.random.Generator(np.random.PCG64(seed)).random((n, d))


def build_interaction_basis(d: int, k: int, order: int, deg: Optional[int] = None,
                            family: str = "legendre") -> BasisSpec:
    """Controls with at most ``order`` nonzero coordinates (``m = kd + k^2 d(d-1)/2`` for order 2).

    ``deg`` optionally adds a total-degree threshold.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return BasisSpec(family, d, k, k * order if deg is None else deg, order=order)


# ---------------------------------------------------------------------------
# configuration


def _check_methods(methods: Sequence[str]) -> list[str]:
    methods = [str(m).lower() for m in methods]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
    if not methods:
        raise ConfigError("no methods requested")
    if "mc" not in methods:
        methods.insert(0, "mc")  # efficiencies are relative to vanilla MC
    return [m for m in METHODS if m in methods]


@dataclass
class ExperimentConfig:
    integrand: str
    d: int
    k: int
    degs: list[int]
    n: int
    j: Optional[int] = None
    family: str = "legendre"
    order: Optional[int] = None
    N: Optional[int] = None
    replicates: int = 100
    master_seed: int = 0
    methods: list[str] = field(default_factory=lambda: ["mc", "ols", "lasso", "lslassox"])
    selector: str = "dichotomic"
    K: int = 5
    c1: float = 3.0
    c2: float = 12.0
    output: Optional[str] = None

    def __post_init__(self):
        self.methods = _check_methods(self.methods)
        self.degs = sorted({int(v) for v in self.degs})
        if self.selector not in SELECTORS:
            raise ConfigError(f"selector must be one of {SELECTORS}")
        if not self.degs:
            raise ConfigError("degree list is empty")
        if self.replicates < 1:
            raise ConfigError("need at least one replicate")
        if self.N is not None and not 1 <= self.N <= self.n:
            raise ConfigError(f"N={self.N} must lie in [1, n={self.n}]")
        if "lslasso" in self.methods and self.N is None:
            raise ConfigError("method 'lslasso' needs the subsample size N")
        if "halton" in self.methods and self.d > HALTON_MAX_DIM:
            raise ConfigError(f"Halton baseline limited to d <= {HALTON_MAX_DIM}")
        try:
            make_integrand(self.integrand, self.d, self.j)
            Family.parse(self.family)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        if "deg" in obj and "degs" not in obj:
            deg = obj.pop("deg")
            obj["degs"] = deg if isinstance(deg, list) else [deg]
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# report


@dataclass
class MethodResult:
    method: str
    m: int
    estimates: np.ndarray
    wall_time_ms: float
    mse: float = float("nan")
    efficiency: float = float("nan")


@dataclass
class ExperimentReport:
    config: dict
    true_value: float
    results: list[MethodResult]
    extra: dict = field(default_factory=dict)

    def get(self, method: str, m: int = 0) -> MethodResult:
        for res in self.results:
            if res.method == method and res.m == m:
                return res
        raise KeyError((method, m))

    def efficiency(self, method: str, m: int = 0) -> float:
        return self.get(method, m).efficiency

    @property
    def ms(self) -> list[int]:
        return sorted({r.m for r in self.results if r.m > 0})

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "true_value": self.true_value,
            "extra": self.extra,
            "results": [
                {"method": r.method, "m": r.m, "mse": r.mse, "efficiency": r.efficiency,
                 "wall_time_ms": r.wall_time_ms, "estimates": [float(v) for v in r.estimates]}
                for r in self.results
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentReport":
        results = [MethodResult(r["method"], int(r["m"]), np.asarray(r["estimates"], dtype=float),
                                float(r["wall_time_ms"]), float(r["mse"]), float(r["efficiency"]))
                   for r in obj["results"]]
        return cls(obj["config"], float(obj["true_value"]), results, obj.get("extra", {}))


def _finalize(report: ExperimentReport) -> ExperimentReport:
    for res in report.results:
        res.mse = float(np.mean((res.estimates - report.true_value) ** 2))
    mc = report.get("mc", 0).mse
    for res in report.results:
        if res.method == "mc":
            res.efficiency = 1.0
        elif res.mse == 0.0:
            res.efficiency = math.inf
        else:
            res.efficiency = mc / res.mse
    return report


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: ExperimentReport, out_dir, formats: Sequence[str] = ("csv", "json")) -> list[Path]:
    """Write per-replicate, summary and timing tables and/or the JSON report.

    ``summary.csv`` holds only quantities that are a deterministic function of
    the configuration; wall-clock times go to ``timings.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / "estimates.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "m", "replicate", "estimate", "abs_error"])
            for res in report.results:
                for r, est in enumerate(res.estimates):
                    w.writerow([res.method, res.m, r, _fmt(est), _fmt(abs(est - report.true_value))])
        written.append(path)
        path = out / "summary.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "m", "mse", "efficiency"])
            for res in report.results:
                w.writerow([res.method, res.m, _fmt(res.mse), _fmt(res.efficiency)])
        written.append(path)
        path = out / "timings.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "m", "wall_time_ms"])
            for res in report.results:
                w.writerow([res.method, res.m, f"{res.wall_time_ms:.3f}"])
        written.append(path)
    if "json" in formats:
        path = out / "report.json"
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=1)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# replicated runs


@dataclass
class _Plan:
    """What one replicate has to compute, independent of where the points come from."""

    d: int
    n: int
    N: Optional[int]
    spec: Optional[BasisSpec]
    ms: list[int]
    methods: list[str]
    selector: str
    selector_kwargs: dict


def _timed(fn: Callable):
    t0 = time.perf_counter()
    out = fn()
    return out, 1000.0 * (time.perf_counter() - t0)


def _estimate_replicate(plan: _Plan, f: Callable[[np.ndarray], np.ndarray], seed) -> dict:
    X = sample_uniform(plan.d, plan.n, seed)
    f_vals = f(X)
    out = {("mc", 0): (float(f_vals.mean()), 0.0)}
    cv_methods = [m for m in plan.methods if m in ("ols", "lasso", "lslasso", "lslassox")]
    if not cv_methods:
        return out
    full = SampleBatch(f_vals, build_design(plan.spec, X), X)
    for m in plan.ms:
        batch = full.prefix(m)
        if "ols" in plan.methods:
            res, dt = _timed(lambda: ols_estimate(batch))
            out[("ols", m)] = (res.alpha, dt)
        sel = None
        if "lasso" in plan.methods:
            sel, dt_sel = _timed(lambda: select(batch, batch.n, plan.selector, **plan.selector_kwargs))
            res, dt = _timed(lambda: lasso_estimate(batch, selection=sel))
            out[("lasso", m)] = (res.alpha, dt_sel + dt)
        if "lslasso" in plan.methods:
            # with N = n the support comes from the same fit as the plain LASSO
            if sel is None or plan.N != batch.n:
                sel, dt_sel = _timed(lambda: select(batch, plan.N, plan.selector,
                                                    **plan.selector_kwargs))
            res, dt = _timed(lambda: lslasso_estimate(batch, selection=sel))
            out[("lslasso", m)] = (res.alpha, dt_sel + dt)
        if "lslassox" in plan.methods:
            res, dt = _timed(lambda: lslasso_estimate(batch, lslassox_subsample(plan.n), plan.selector,
                                                      **plan.selector_kwargs))
            out[("lslassox", m)] = (res.alpha, dt)
    return out


def _collect(plan: _Plan, f: Callable, master_seed: int, replicates: int, workers: int,
             halton_value: Optional[float]) -> list[MethodResult]:
    per_rep = ordered_map(lambda r: _estimate_replicate(plan, f, replicate_seed(master_seed, r)),
                          range(replicates), workers)
    keys = [("mc", 0)]
    if halton_value is not None:
        keys.append(("halton", 0))
    for method in ("ols", "lasso", "lslasso", "lslassox"):
        if method in plan.methods:
            keys.extend((method, m) for m in plan.ms)
    results = []
    for key in keys:
        if key[0] == "halton":
            est = np.full(replicates, halton_value)
            wall = 0.0
        else:
            est = np.array([rep[key][0] for rep in per_rep])
            wall = float(np.mean([rep[key][1] for rep in per_rep]))
        results.append(MethodResult(key[0], key[1], est, wall))
    return results


def _plan_for(d: int, n: int, N: int, spec: Optional[BasisSpec], degs: Sequence[int],
              methods: list[str], selector: str, K: int, c1: float, c2: float) -> _Plan:
    ms = [] if spec is None else sorted({spec.prefix_size(g) for g in degs} - {0})
    kwargs = {"K": K} if selector == "kfold" else {"c1": c1, "c2": c2}
    return _Plan(d, n, N, spec, ms, methods, selector, kwargs)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None,
                   write: bool = True) -> ExperimentReport:
    """Replicated paired comparison of the requested methods on a synthetic integrand."""
    integrand = make_integrand(cfg.integrand, cfg.d, cfg.j)
    if integrand.true_value is None:
        raise ConfigError(f"integrand {cfg.integrand!r} has no known integral")
    spec = BasisSpec(cfg.family, cfg.d, cfg.k, max(cfg.degs), order=cfg.order)
    plan = _plan_for(cfg.d, cfg.n, cfg.N, spec, cfg.degs, cfg.methods, cfg.selector,
                     cfg.K, cfg.c1, cfg.c2)
    workers = thread_cap() if workers is None else workers
    halton = None
    if "halton" in cfg.methods:
        halton = float(np.mean(integrand(halton_points(cfg.d, cfg.n))))
    t0 = time.perf_counter()
    results = _collect(plan, integrand, cfg.master_seed, cfg.replicates, workers, halton)
    log.info("experiment finished in %.1fs", time.perf_counter() - t0)
    report = _finalize(ExperimentReport(cfg.to_dict(), float(integrand.true_value), results,
                                        {"m_values": plan.ms}))
    if write and cfg.output:
        emit_report(report, cfg.output)
    return report


# ---------------------------------------------------------------------------
# Bayesian evidence


# "loglik" integrates the log-likelihood itself: a smooth diagnostic target
BAYES_TARGETS = ("evidence", "loglik")


@dataclass
class BayesConfig:
    dataset: str
    n: int = 5000
    N: Optional[int] = None
    k: int = 10
    order: int = 2
    degs: list[int] = field(default_factory=lambda: [6])
    replicates: int = 100
    master_seed: int = 0
    methods: list[str] = field(default_factory=lambda: ["mc", "ols", "lasso", "lslassox"])
    selector: str = "dichotomic"
    K: int = 5
    c1: float = 3.0
    c2: float = 12.0
    n_gold: int = 10**7
    target: str = "evidence"
    gold_seed: int = 12345
    n_pilot: int = 1000
    data_path: Optional[str] = None
    cache_dir: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        self.dataset = self.dataset.lower()
        if self.dataset not in ("capture", "sonar"):
            raise ConfigError("dataset must be 'capture' or 'sonar'")
        if self.dataset == "sonar" and not self.data_path:
            raise ConfigError("the sonar dataset needs data_path")
        self.methods = _check_methods(self.methods)
        if "halton" in self.methods:
            raise ConfigError("the Halton baseline is only offered for synthetic integrands")
        self.degs = sorted({int(v) for v in self.degs})
        if self.selector not in SELECTORS:
            raise ConfigError(f"selector must be one of {SELECTORS}")
        if self.N is not None and not 1 <= self.N <= self.n:
            raise ConfigError(f"N={self.N} must lie in [1, n={self.n}]")
        if "lslasso" in self.methods and self.N is None:
            raise ConfigError("method 'lslasso' needs the subsample size N")
        if self.replicates < 1 or self.n_gold < 1:
            raise ConfigError("replicates and n_gold must be positive")
        if self.target not in BAYES_TARGETS:
            raise ConfigError(f"target must be one of {BAYES_TARGETS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "BayesConfig":
        obj = dict(obj)
        if "deg" in obj and "degs" not in obj:
            deg = obj.pop("deg")
            obj["degs"] = deg if isinstance(deg, list) else [deg]
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json_file(cls, path) -> "BayesConfig":
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(obj)


@dataclass
class GoldStandard:
    mean: float  # of exp(loglik - shift), or of loglik when target="loglik"
    se: float
    shift: float
    n: int
    seed: int

    target: str = "evidence"

    @property
    def log_evidence(self) -> float:
        if self.target != "evidence":
            return math.nan
        return self.shift + math.log(self.mean)

    @property
    def rel_se(self) -> float:
        return self.se / abs(self.mean)


def _target_values(model: EvidenceModel, target: str, shift: float):
    if target == "loglik":
        return model.loglik_unit
    return lambda u: np.exp(model.loglik_unit(u) - shift)


def gold_standard(model: EvidenceModel, shift: float, n_gold: int, seed: int,
                  chunk: int = 200_000, cache_dir=None, target: str = "evidence") -> GoldStandard:
    """Plain Monte Carlo reference value, cached on disk keyed by its inputs."""
    values = _target_values(model, target, shift)
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"gold_{model.name}_{target}_{n_gold}_{seed}_{shift!r}.json"
        if cache.exists():
            with open(cache) as fh:
                return GoldStandard(**json.load(fh))
    rng = np.random.Generator(np.random.PCG64(seed))
    total, total_sq, done = 0.0, 0.0, 0
    while done < n_gold:
        size = min(chunk, n_gold - done)
        vals = values(rng.random((size, model.dim)))
        total += float(vals.sum())
        total_sq += float(vals @ vals)
        done += size
    mean = total / n_gold
    var = max(total_sq / n_gold - mean**2, 0.0) * n_gold / max(n_gold - 1, 1)
    gold = GoldStandard(mean, math.sqrt(var / n_gold), shift, n_gold, seed, target)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        with open(cache, "w") as fh:
            json.dump(asdict(gold), fh)
    return gold


def bayes_model(cfg: BayesConfig) -> EvidenceModel:
    if cfg.dataset == "capture":
        return capture_model()
    return sonar_model(load_sonar(cfg.data_path))


def run_bayes(cfg: BayesConfig, workers: Optional[int] = None, write: bool = True) -> ExperimentReport:
    """Evidence ratios ``Z_hat / Z*`` per replicate and their efficiencies.

    One shift constant (max log-likelihood over a seeded pilot sample) is used
    for the gold standard and every replicate, so ratios need no rescaling.
    """
    model = bayes_model(cfg)
    shift = model.pilot_shift(cfg.n_pilot, seed=cfg.master_seed) if cfg.target == "evidence" else 0.0
    gold = gold_standard(model, shift, cfg.n_gold, cfg.gold_seed, cache_dir=cfg.cache_dir,
                         target=cfg.target)
    values = _target_values(model, cfg.target, shift)
    ratio = Integrand(f"{model.name}_{cfg.target}", model.dim, lambda u: values(u) / gold.mean, 1.0)
    spec = build_interaction_basis(model.dim, cfg.k, cfg.order, max(cfg.degs))
    plan = _plan_for(model.dim, cfg.n, cfg.N, spec, cfg.degs, cfg.methods, cfg.selector,
                     cfg.K, cfg.c1, cfg.c2)
    workers = thread_cap() if workers is None else workers
    results = _collect(plan, ratio, cfg.master_seed, cfg.replicates, workers, None)
    extra = {"m_values": plan.ms, "shift": shift, "gold_mean": gold.mean, "gold_se": gold.se,
             "gold_rel_se": gold.rel_se, "log_evidence_gold": gold.log_evidence, "target": cfg.target,
             "n_gold": gold.n, "gold_seed": gold.seed}
    report = _finalize(ExperimentReport(cfg.to_dict(), 1.0, results, extra))
    if write and cfg.output:
        emit_report(report, cfg.output)
    return report
