"""Numeric evaluators for the non-asymptotic error bounds and their conditions.

Each evaluator returns the bound on ``|alpha_hat - P(f)|`` that holds with
probability at least ``1 - delta`` together with a flag telling whether the
sample-size / penalty conditions under which the bound is claimed are met.
:func:`empirical_coverage` checks a bound by simulation on a synthetic model.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._parallel import ordered_map, replicate_seed
from .basis import BasisSpec, Family, build_design, diagnostics
from .estimators import (SampleBatch, lasso_estimate, lslasso_estimate, ols_estimate,
                         oracle_estimate)


class BoundError(ValueError):
    pass


@dataclass
class BoundParams:
    tau: Optional[float] = None
    n: Optional[int] = None
    m: Optional[int] = None
    N: Optional[int] = None
    delta: Optional[float] = None
    gamma: Optional[float] = None
    gamma_star: Optional[float] = None
    gamma_2star: Optional[float] = None
    u_h: Optional[float] = None
    b: Optional[float] = None
    b_star: Optional[float] = None
    ell_star: Optional[int] = None
    lam: Optional[float] = None
    beta_min: Optional[float] = None

    @classmethod
    def from_dict(cls, obj: dict) -> "BoundParams":
        aliases = {"lambda": "lam", "B": "b", "B_star": "b_star", "gamma_starstar": "gamma_2star"}
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, val in obj.items():
            key = aliases.get(key, key)
            if key not in known:
                raise BoundError(f"unknown bound parameter {key!r}")
            kwargs[key] = val
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise BoundError(f"missing parameters: {', '.join(missing)}")
        delta = self.delta
        if "delta" in names and not 0.0 < delta < 1.0:
            raise BoundError(f"delta must lie in (0, 1), got {delta}")


class Bound(NamedTuple):
    bound: float
    admissible: bool


class LassoBound(NamedTuple):
    bound_general: float
    bound_at_min_lambda: float
    admissible: bool


class Interval(NamedTuple):
    lo: float
    hi: float
    nonempty: bool


def _head(tau, n, delta, c) -> float:
    return math.sqrt(2.0 * math.log(c / delta)) * tau / math.sqrt(n)


def oracle_bound(p: BoundParams) -> float:
    p.require("tau", "n", "delta")
    return _head(p.tau, p.n, p.delta, 2.0)


def ols_sample_size(p: BoundParams) -> float:
    p.require("m", "b", "delta")
    return max(18.0 * p.b * math.log(4 * p.m / p.delta), 75.0 * p.m * math.log(4 / p.delta))


def ols_bound(p: BoundParams) -> Bound:
    p.require("tau", "n", "m", "b", "delta")
    second = 58.0 * math.sqrt(p.b * p.m * math.log(8 * p.m / p.delta) * math.log(4 / p.delta)) * p.tau / p.n
    return Bound(_head(p.tau, p.n, p.delta, 8.0) + second, p.n >= ols_sample_size(p))


def lasso_lambda_floor(p: BoundParams) -> float:
    p.require("tau", "n", "m", "u_h", "delta")
    return 7.0 * p.u_h * math.sqrt(math.log(8 * p.m / p.delta)) * p.tau / math.sqrt(p.n)


def lasso_bound(p: BoundParams) -> LassoBound:
    p.require("tau", "n", "m", "u_h", "gamma_star", "ell_star", "delta")
    xi = p.ell_star * p.u_h**2 / p.gamma_star
    log8m = math.log(8 * p.m / p.delta)
    head = _head(p.tau, p.n, p.delta, 8.0)
    floor = lasso_lambda_floor(p)
    lam = floor if p.lam is None else p.lam
    general = head + 68.0 * lam * p.ell_star * math.sqrt(log8m) * (p.u_h / p.gamma_star) / math.sqrt(p.n)
    at_min = head + 476.0 * p.ell_star * log8m * (p.u_h**2 / p.gamma_star) * p.tau / p.n
    n_ok = p.n >= max(8.0 * xi**2 * math.log(8 * p.m**2 / p.delta), 128.0 * xi * log8m)
    return LassoBound(general, at_min, bool(n_ok and lam >= floor * (1 - 1e-12)))


def _lambda_ceiling(p: BoundParams) -> float:
    return p.gamma_2star * p.beta_min / (3.0 * math.sqrt(p.ell_star))


def lambda_interval(p: BoundParams) -> Interval:
    """Penalties for which the LASSO recovers the true support."""
    p.require("tau", "n", "m", "u_h", "gamma_2star", "ell_star", "beta_min", "delta")
    lo = 13.0 * p.u_h * math.sqrt(math.log(10 * p.m / p.delta)) * p.tau / math.sqrt(p.n)
    hi = _lambda_ceiling(p)
    return Interval(lo, hi, lo <= hi)


def support_recovery_sample_size(p: BoundParams) -> float:
    p.require("m", "u_h", "gamma_2star", "ell_star", "delta")
    xi = p.ell_star * p.u_h**2 / p.gamma_2star
    return 70.0 * xi**2 * math.log(10 * p.ell_star * p.m / p.delta)


def lslasso_lambda_interval(p: BoundParams) -> Interval:
    """Support-recovery penalties when selection uses the first ``N`` rows."""
    p.require("tau", "N", "m", "u_h", "gamma_2star", "ell_star", "beta_min", "delta")
    lo = 13.0 * p.u_h * math.sqrt(math.log(20 * p.m / p.delta)) * p.tau / math.sqrt(p.N)
    hi = _lambda_ceiling(p)
    return Interval(lo, hi, lo <= hi)


def lslasso_bound(p: BoundParams) -> Bound:
    p.require("tau", "n", "m", "N", "u_h", "gamma_2star", "ell_star", "beta_min", "delta")
    b_star = p.b_star if p.b_star is not None else p.ell_star * p.u_h**2 / p.gamma_2star
    second = 58.0 * math.sqrt(b_star * p.ell_star * math.log(16 * p.ell_star / p.delta)
                              * math.log(8 / p.delta)) * p.tau / p.n
    xi = p.ell_star * p.u_h**2 / p.gamma_2star
    n_ok = p.N >= 75.0 * xi**2 * math.log(20 * p.ell_star * p.m / p.delta) and p.N <= p.n
    interval = lslasso_lambda_interval(p)
    lam_ok = p.lam is not None and interval.lo <= p.lam <= interval.hi
    return Bound(_head(p.tau, p.n, p.delta, 16.0) + second, bool(n_ok and lam_ok))


def b_from_basis(spec: BasisSpec) -> tuple[float, str]:
    """Value for B and where it came from.

    Legendre: the corner value ``sum_l prod_j (2 l_j + 1)``, which is exact.
    Fourier: the bound ``m U_h^2 / gamma = 2m``.
    """
    diag = diagnostics(spec)
    if spec.family is Family.LEGENDRE:
        return diag.b_bound, "exact_corner"
    return diag.b_bound, "m*u_h^2/gamma"


def bound_report(p: BoundParams) -> dict:
    """Every bound computable from the supplied parameters."""
    out: dict = {"params": p.to_dict()}
    attempts: dict[str, Callable[[], object]] = {
        "oracle": lambda: {"bound": oracle_bound(p)},
        "ols": lambda: ols_bound(p)._asdict(),
        "lasso": lambda: lasso_bound(p)._asdict(),
        "lambda_interval": lambda: lambda_interval(p)._asdict(),
        "lslasso_lambda_interval": lambda: lslasso_lambda_interval(p)._asdict(),
        "lslasso": lambda: lslasso_bound(p)._asdict(),
    }
    if p.b is None and p.m is not None and p.u_h is not None and p.gamma is not None:
        p_b = BoundParams(**{**asdict(p), "b": p.m * p.u_h**2 / p.gamma})
        out["b_used"] = {"value": p_b.b, "source": "m*u_h^2/gamma"}
        attempts["ols"] = lambda: ols_bound(p_b)._asdict()
    elif p.b is not None:
        out["b_used"] = {"value": p.b, "source": "supplied"}
    skipped = {}
    for name, fn in attempts.items():
        try:
            out[name] = fn()
        except BoundError as exc:
            skipped[name] = str(exc)
    if skipped:
        out["skipped"] = skipped
    return out


# ---------------------------------------------------------------------------
# empirical coverage


@dataclass
class CoverageModel:
    """Synthetic integrand ``const + beta*^T h + noise_amp * h_q`` on [0, 1].

    ``h_q`` is a univariate control of degree ``noise_degree`` outside the
    basis, so it is orthogonal to every control and the residual is bounded by
    ``noise_amp * U_h``.  The sub-Gaussian factor is then ``tau = noise_amp * U_h``.
    """

    spec: BasisSpec
    beta_star: np.ndarray
    const: float = 1.0
    noise_amp: float = 0.1
    noise_degree: Optional[int] = None
    n: int = 1000
    N: Optional[int] = None
    delta: float = 0.2
    lam: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta_star = np.asarray(self.beta_star, dtype=float)
        if self.beta_star.shape != (self.spec.m,):
            raise ValueError("beta_star must have one entry per control")
        if self.spec.d != 1:
            raise ValueError("coverage models are univariate")
        if self.noise_degree is None:
            self.noise_degree = self.spec.k + 1
        if self.noise_degree <= self.spec.k:
            raise ValueError("the residual control must lie outside the basis")
        self._noise_spec = BasisSpec(self.spec.family, 1, self.noise_degree, self.noise_degree)

    @property
    def tau(self) -> float:
        return self.noise_amp * diagnostics(self.spec).u_h

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta_star)

    def evaluate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        H = build_design(self.spec, x)
        noise = build_design(self._noise_spec, x)[:, -1]
        return self.const + H @ self.beta_star + self.noise_amp * noise, H

    def params(self) -> BoundParams:
        diag = diagnostics(self.spec)
        S = self.support
        gram_S = diag.gram_diagonal[S]
        b, _ = b_from_basis(self.spec)
        b_star = float(np.sum(1.0 / gram_S)) if self.spec.family is Family.LEGENDRE else 2.0 * S.size
        return BoundParams(
            tau=self.tau, n=self.n, m=self.spec.m, N=self.N if self.N is not None else self.n,
            delta=self.delta, gamma=diag.gamma, gamma_star=diag.gamma,
            gamma_2star=float(gram_S.min()) if S.size else None, u_h=diag.u_h, b=b,
            b_star=b_star, ell_star=int(S.size),
            lam=self.lam, beta_min=float(np.abs(self.beta_star[S]).min()) if S.size else None,
        )


class CoverageResult(NamedTuple):
    coverage: float
    lo: float
    hi: float
    half_width: float
    bound: float
    replicates: int


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    centre = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return centre - half, centre + half


BOUND_OPS = ("oracle", "ols", "lasso", "lslasso")


def _bound_and_flag(model: CoverageModel, bound_op: str) -> tuple[float, bool]:
    p = model.params()
    if bound_op == "oracle":
        return oracle_bound(p), True
    if bound_op == "ols":
        return tuple(ols_bound(p))
    if bound_op == "lasso":
        res = lasso_bound(p)
        return res.bound_general, res.admissible
    if bound_op == "lslasso":
        return tuple(lslasso_bound(p))
    raise ValueError(f"unknown bound {bound_op!r}; choose from {BOUND_OPS}")


def _coverage_error(model: CoverageModel, bound_op: str, seed) -> float:
    rng = np.random.default_rng(seed)
    x = rng.random((model.n, 1))
    f_vals, H = model.evaluate(x)
    batch = SampleBatch(f_vals, H, x)
    p = model.params()
    if bound_op == "oracle":
        est = oracle_estimate(f_vals, H, model.beta_star)
    elif bound_op == "ols":
        est = ols_estimate(batch)
    elif bound_op == "lasso":
        lam = p.lam if p.lam is not None else lasso_lambda_floor(p)
        est = lasso_estimate(batch, lam=lam, standardize=False)
    else:
        est = lslasso_estimate(batch, p.N, lam=p.lam, standardize=False)
    return abs(est.alpha - model.const)


def empirical_coverage(model: CoverageModel, bound_op: str, replicates: int, seed: int = 0,
                       workers: int = 1) -> CoverageResult:
    """Fraction of replicates whose error lies within the bound, with a Wilson interval."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    bound, admissible = _bound_and_flag(model, bound_op)
    if not admissible:
        raise BoundError(f"{bound_op} bound is not claimed for this configuration")
    errors = ordered_map(lambda r: _coverage_error(model, bound_op, replicate_seed(seed, r)),
                         range(replicates), workers)
    hits = int(np.sum(np.asarray(errors) <= bound))
    lo, hi = wilson_interval(hits, replicates)
    return CoverageResult(hits / replicates, lo, hi, (hi - lo) / 2, bound, replicates)
