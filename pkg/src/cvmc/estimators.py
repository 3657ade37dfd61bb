"""Control-variate estimators of an integral from one batch of samples.

All estimators return ``alpha = P_n(f) - beta^T P_n(h)``, the intercept of a
regression of ``f`` on the controls, for some coefficient vector ``beta``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .lasso import LassoProblem

C1_DEFAULT = 3.0
C2_DEFAULT = 12.0
TOL_DEFAULT = 1e-7
MAX_SWEEPS_DEFAULT = 1000
MAX_STEPS_DEFAULT = 60
GRID_SIZE_DEFAULT = 50
GRID_RATIO_DEFAULT = 1e-4


class Method(str, Enum):
    MC = "mc"
    ORACLE = "oracle"
    OLS = "ols"
    LASSO = "lasso"
    LSLASSO = "lslasso"


@dataclass
class SampleBatch:
    """Function values, design matrix and their column-centered versions."""

    f_vals: np.ndarray
    H: np.ndarray
    X: Optional[np.ndarray] = None
    f_mean: float = field(init=False)
    h_mean: np.ndarray = field(init=False, repr=False)
    f_c: np.ndarray = field(init=False, repr=False)
    H_c: np.ndarray = field(init=False, repr=False)
    col_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.f_vals = np.asarray(self.f_vals, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        if self.H.ndim == 1:
            self.H = self.H.reshape(-1, 1)
        if self.f_vals.ndim != 1 or self.H.shape[0] != self.f_vals.shape[0]:
            raise ValueError(f"f has shape {self.f_vals.shape}, H has shape {self.H.shape}")
        if self.f_vals.size == 0:
            raise ValueError("empty sample")
        self.f_mean = float(self.f_vals.mean())
        self.h_mean = self.H.mean(axis=0)
        self.f_c = self.f_vals - self.f_mean
        self.H_c = self.H - self.h_mean
        self.col_norms = np.sqrt(np.einsum("ij,ij->j", self.H_c, self.H_c))

    @property
    def n(self) -> int:
        return self.f_vals.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[1]

    def head(self, N: int) -> "SampleBatch":
        """First ``N`` rows, re-centered on themselves."""
        if not 1 <= N <= self.n:
            raise ValueError(f"subsample size N={N} outside [1, {self.n}]")
        if N == self.n:
            return self
        X = None if self.X is None else self.X[:N]
        return SampleBatch(self.f_vals[:N], self.H[:N], X)

    def prefix(self, m: int) -> "SampleBatch":
        """The first ``m`` controls; centered blocks are shared, not recomputed."""
        if m == self.m:
            return self
        out = object.__new__(SampleBatch)
        out.f_vals, out.H, out.X = self.f_vals, self.H[:, :m], self.X
        out.f_mean, out.h_mean, out.f_c = self.f_mean, self.h_mean[:m], self.f_c
        out.H_c, out.col_norms = self.H_c[:, :m], self.col_norms[:m]
        return out


@dataclass
class EstimateResult:
    alpha: float
    beta: np.ndarray
    method: Method
    iterations: int = 0
    lambda_used: Optional[float] = None
    subsample_N: Optional[int] = None
    flags: list[str] = field(default_factory=list)

    @property
    def active_set(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.beta)]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "method": Method(self.method).value,
            "active_set": self.active_set,
            "lambda_used": self.lambda_used,
            "iterations": self.iterations,
            "N": self.subsample_N,
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _intercept(batch: SampleBatch, beta: np.ndarray) -> float:
    return float(batch.f_mean - beta @ batch.h_mean)


def mc_estimate(f_vals, m: int = 0) -> EstimateResult:
    f_vals = np.asarray(f_vals, dtype=float)
    if f_vals.size == 0:
        raise ValueError("empty sample")
    return EstimateResult(float(f_vals.mean()), np.zeros(m), Method.MC)


def oracle_estimate(f_vals, H, beta_star) -> EstimateResult:
    """``P_n(f - beta*^T h)`` with externally known optimal coefficients."""
    f_vals = np.asarray(f_vals, dtype=float)
    H = np.asarray(H, dtype=float).reshape(f_vals.shape[0], -1)
    beta_star = np.asarray(beta_star, dtype=float)
    if beta_star.shape != (H.shape[1],):
        raise ValueError(f"beta* has shape {beta_star.shape}, expected ({H.shape[1]},)")
    return EstimateResult(float(np.mean(f_vals - H @ beta_star)), beta_star.copy(), Method.ORACLE)


def ols_estimate(batch: SampleBatch, columns: Optional[Sequence[int]] = None) -> EstimateResult:
    """Least squares on centered variables; minimal-norm solution if rank deficient."""
    cols = np.arange(batch.m) if columns is None else np.asarray(columns, dtype=np.int64)
    beta = np.zeros(batch.m)
    flags = []
    if cols.size:
        A = batch.H_c[:, cols]
        cutoff = max(A.shape) * np.finfo(float).eps
        coef, _, rank, _ = scipy.linalg.lstsq(A, batch.f_c, cond=cutoff, lapack_driver="gelsd",
                                              check_finite=False)
        if rank < cols.size:
            flags.append("rank_deficient")
        beta[cols] = coef
    return EstimateResult(_intercept(batch, beta), beta, Method.OLS, flags=flags)


def soft_threshold(z, lam):
    if np.any(np.asarray(lam) < 0):
        raise ValueError("threshold must be nonnegative")
    out = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def lasso_cd(batch: SampleBatch, lam: float, max_sweeps: int = MAX_SWEEPS_DEFAULT,
             tol: float = TOL_DEFAULT, beta0=None, standardize: bool = True):
    """LASSO coefficients on the original scale and the number of sweeps used."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    prob = LassoProblem(batch.H_c, batch.f_c, standardize=standardize)
    b0 = None if beta0 is None else prob.from_original(beta0)
    b, sweeps = prob.solve(lam, b0, max_sweeps=max_sweeps, tol=tol)
    return prob.to_original(b), sweeps


def lambda_max(batch: SampleBatch, N: Optional[int] = None, standardize: bool = True) -> float:
    """Smallest penalty giving the all-zero solution on the first ``N`` rows."""
    sub = batch.head(batch.n if N is None else N)
    return LassoProblem(sub.H_c, sub.f_c, standardize=standardize).lambda_max()


def target_range(n: int, c1: float = C1_DEFAULT, c2: float = C2_DEFAULT) -> tuple[int, int]:
    """``(floor(c1 sqrt n), floor(c2 sqrt n))`` as tabulated for the search targets."""
    root = math.sqrt(n)
    return math.floor(c1 * root + 1e-12), math.floor(c2 * root + 1e-12)


def lslassox_subsample(n: int) -> int:
    return int(math.floor(15 * math.sqrt(n)))


@dataclass
class Selection:
    """A LASSO fit on a (sub)sample together with the penalty that produced it."""

    beta: np.ndarray
    lam: float
    N: int
    iterations: int = 0
    steps: int = 0
    flags: list[str] = field(default_factory=list)
    cv_curve: Optional[np.ndarray] = None

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.beta))


def dichotomic_search(batch: SampleBatch, N: Optional[int] = None, c1: float = C1_DEFAULT,
                      c2: float = C2_DEFAULT, max_steps: int = MAX_STEPS_DEFAULT,
                      n_target: Optional[int] = None, min_ratio: float = GRID_RATIO_DEFAULT,
                      tol: float = TOL_DEFAULT, max_sweeps: int = MAX_SWEEPS_DEFAULT,
                      standardize: bool = True) -> Selection:
    """Tune the penalty so that the support size lands in ``[c1 sqrt n, c2 sqrt n]``.

    The fit uses the first ``N`` rows while the target range uses the full
    sample size ``n_target`` (default ``batch.n``).  Starting at lambda_max the
    penalty is halved until the support is large enough; an overshoot is then
    resolved by bisecting (geometric midpoint) the last straddling pair.  When
    fewer than ``c1 sqrt n`` controls are available the range is unreachable
    and the search keeps halving down to ``min_ratio * lambda_max``.
    """
    if not 0 < c1 < c2:
        raise ValueError("need 0 < c1 < c2")
    N = batch.n if N is None else N
    sub = batch.head(N)
    n_target = batch.n if n_target is None else n_target
    lo, hi = c1 * math.sqrt(n_target), c2 * math.sqrt(n_target)
    prob = LassoProblem(sub.H_c, sub.f_c, standardize=standardize)
    lam_top = prob.lambda_max()
    b = np.zeros(prob.m)
    flags: list[str] = []
    if lam_top == 0.0:
        return Selection(np.zeros(prob.m), 0.0, N, flags=["zero_response"])

    usable = int(np.count_nonzero(~prob.skip))
    reachable = usable >= lo
    if not reachable:
        flags.append("target_unreachable")
        warnings.warn(
            f"only {usable} usable controls, fewer than c1*sqrt(n)={lo:.1f}; "
            "returning the smallest-penalty fit", RuntimeWarning, stacklevel=2)

    lam, ell = lam_top, 0
    lam_big, lam_small = lam_top, None  # support below / above the range
    sweeps_total, steps = 0, 0
    best = None

    def distance(count):
        return max(lo - count, count - hi, 0.0)

    while steps < max_steps:
        if reachable:
            if lo <= ell <= hi:
                break
            if ell < lo:
                lam_big = lam
                lam = lam / 2 if lam_small is None else math.sqrt(lam_big * lam_small)
            else:
                lam_small = lam
                lam = math.sqrt(lam_big * lam_small)
        else:
            if lam <= min_ratio * lam_top:
                break
            lam = max(lam / 2, min_ratio * lam_top)
        b, sweeps = prob.solve(lam, b, max_sweeps=max_sweeps, tol=tol)
        sweeps_total += sweeps
        steps += 1
        ell = int(np.count_nonzero(b))
        if best is None or distance(ell) < best[0]:
            best = (distance(ell), b.copy(), lam)

    if reachable and not lo <= ell <= hi:
        flags.append("target_not_reached")
        _, b, lam = best
    return Selection(prob.to_original(b), lam, N, sweeps_total, steps, flags)


def lambda_grid(lam_top: float, size: int = GRID_SIZE_DEFAULT,
                ratio: float = GRID_RATIO_DEFAULT) -> np.ndarray:
    return np.geomspace(lam_top, lam_top * ratio, size)


def kfold_cv(batch: SampleBatch, N: Optional[int] = None, grid: Optional[Sequence[float]] = None,
             K: int = 5, tol: float = TOL_DEFAULT, max_sweeps: int = MAX_SWEEPS_DEFAULT,
             standardize: bool = True) -> Selection:
    """K-fold cross-validation over a penalty grid on the first ``N`` rows.

    Folds are contiguous blocks.  Each training fold is centered (and
    standardized) on itself; the test error of fold ``k`` at penalty ``lam`` is
    the sum of squared prediction errors of ``f`` on the held-out rows.  The
    minimizer of the averaged error is refit on all ``N`` rows.
    """
    N = batch.n if N is None else N
    if K < 2:
        raise ValueError("need at least two folds")
    if N < K:
        raise ValueError(f"cannot split N={N} rows into K={K} folds")
    sub = batch.head(N)
    if grid is None:
        grid = lambda_grid(LassoProblem(sub.H_c, sub.f_c, standardize=standardize).lambda_max())
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty penalty grid")
    order = np.argsort(-grid, kind="stable")  # warm starts along decreasing penalties
    errors = np.zeros(grid.size)
    sweeps_total = 0
    for test in np.array_split(np.arange(N), K):
        train = np.setdiff1d(np.arange(N), test, assume_unique=True)
        H_tr, y_tr = sub.H[train], sub.f_vals[train]
        h_bar, y_bar = H_tr.mean(axis=0), y_tr.mean()
        prob = LassoProblem(H_tr - h_bar, y_tr - y_bar, standardize=standardize)
        H_te = sub.H[test] - h_bar
        y_te = sub.f_vals[test] - y_bar
        b = np.zeros(prob.m)
        for g in order:
            if grid[g] <= 0:
                raise ValueError("penalties must be positive")
            b, sweeps = prob.solve(grid[g], b, max_sweeps=max_sweeps, tol=tol)
            sweeps_total += sweeps
            resid = y_te - H_te @ prob.to_original(b)
            errors[g] += float(resid @ resid)
    cv = errors / N
    best = int(np.argmin(cv))
    lam_star = float(grid[best])
    prob = LassoProblem(sub.H_c, sub.f_c, standardize=standardize)
    b = np.zeros(prob.m)
    for g in order:
        if grid[g] < lam_star:
            break
        b, sweeps = prob.solve(grid[g], b, max_sweeps=max_sweeps, tol=tol)
        sweeps_total += sweeps
    return Selection(prob.to_original(b), lam_star, N, sweeps_total, grid.size, cv_curve=cv)


def select(batch: SampleBatch, N: Optional[int] = None, selector: str = "dichotomic",
           lam: Optional[float] = None, **kwargs) -> Selection:
    """LASSO fit on the first ``N`` rows with the penalty fixed or tuned by ``selector``."""
    N = batch.n if N is None else N
    if lam is not None:
        standardize = kwargs.get("standardize", True)
        sub = batch.head(N)
        prob = LassoProblem(sub.H_c, sub.f_c, standardize=standardize)
        b, sweeps = prob.solve(lam, max_sweeps=kwargs.get("max_sweeps", MAX_SWEEPS_DEFAULT),
                               tol=kwargs.get("tol", TOL_DEFAULT))
        return Selection(prob.to_original(b), float(lam), N, sweeps)
    if selector == "dichotomic":
        return dichotomic_search(batch, N, **kwargs)
    if selector == "kfold":
        return kfold_cv(batch, N, **kwargs)
    raise ValueError(f"unknown selector {selector!r}")


def lasso_estimate(batch: SampleBatch, selector: str = "dichotomic", lam: Optional[float] = None,
                   selection: Optional[Selection] = None, **kwargs) -> EstimateResult:
    """Intercept of the LASSO regression fitted on all ``n`` rows."""
    if selection is None:
        selection = select(batch, batch.n, selector, lam, **kwargs)
    elif selection.N != batch.n:
        raise ValueError("a LASSO estimate needs a fit on the full sample")
    beta = selection.beta
    return EstimateResult(_intercept(batch, beta), beta.copy(), Method.LASSO, selection.iterations,
                          selection.lam, batch.n, list(selection.flags))


def lslasso_estimate(batch: SampleBatch, N: Optional[int] = None, selector: str = "dichotomic",
                     lam: Optional[float] = None, selection: Optional[Selection] = None,
                     **kwargs) -> EstimateResult:
    """Support from a LASSO fit on the first ``N`` rows, then OLS on all rows.

    An empty support falls back to the plain Monte Carlo mean.
    """
    if selection is None:
        selection = select(batch, N, selector, lam, **kwargs)
    support = selection.support
    flags = list(selection.flags)
    if support.size == 0:
        res = EstimateResult(batch.f_mean, np.zeros(batch.m), Method.LSLASSO, selection.iterations,
                             selection.lam, selection.N, flags + ["empty_support"])
        return res
    ols = ols_estimate(batch, support)
    return EstimateResult(ols.alpha, ols.beta, Method.LSLASSO, selection.iterations,
                          selection.lam, selection.N, flags + ols.flags)
