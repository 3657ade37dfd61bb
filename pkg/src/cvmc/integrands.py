"""Test integrands on the unit cube and the two Bayesian-evidence models.

All evaluators are vectorized: they accept a single point of shape ``(d,)``
or a batch of shape ``(n, d)``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

LOG2 = math.log(2.0)


def _as_batch(x, d: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    if single:
        x = x.reshape(1, -1) if d > 1 or x.ndim == 1 else x.reshape(1, 1)
    if x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {x.shape}")
    return x, single


@dataclass
class Integrand:
    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    true_value: Optional[float] = None
    lower: float = 0.0
    upper: float = 1.0

    def __call__(self, x):
        pts, single = _as_batch(x, self.dim)
        vals = self.func(pts)
        return float(vals[0]) if single else vals


def phi(d: int) -> Integrand:
    """``1 + sin(pi (2/d sum x_i - 1))``; integrates to 1."""

    def f(x):
        return 1.0 + np.sin(np.pi * (2.0 / d * x.sum(axis=1) - 1.0))

    return Integrand("phi", d, f, true_value=1.0)


def lognormal_factor(x):
    return math.sqrt(2.0 / math.pi) / x * np.exp(-np.log(x) ** 2 / 2.0)


def f_j(d: int, j: int) -> Integrand:
    """Product of the first ``j`` half-log-normal densities; integrates to 1."""
    if not 1 <= j <= d:
        raise ValueError("need 1 <= j <= d")

    def f(x):
        head = x[:, :j]
        if np.any(head <= 0.0):
            raise ValueError("f_j is singular at x_i = 0 for i <= j")
        return np.prod(lognormal_factor(head), axis=1)

    return Integrand(f"f{j}", d, f, true_value=1.0)


def g_j(d: int, j: int) -> Integrand:
    """``log(2)^j 2^{sum_{i<=j} (1 - x_i)}``; integrates to 1."""
    if not 1 <= j <= d:
        raise ValueError("need 1 <= j <= d")

    def f(x):
        return LOG2**j * np.exp2(j - x[:, :j].sum(axis=1))

    return Integrand(f"g{j}", d, f, true_value=1.0)


def make_integrand(name: str, d: int, j: int | None = None) -> Integrand:
    key = name.lower()
    if key == "phi":
        return phi(d)
    if key in ("f", "g") and j is None:
        raise ValueError(f"integrand {name!r} needs j")
    if key == "f" or (key.startswith("f") and key[1:].isdigit()):
        return f_j(d, j if key == "f" else int(key[1:]))
    if key == "g" or (key.startswith("g") and key[1:].isdigit()):
        return g_j(d, j if key == "g" else int(key[1:]))
    raise ValueError(f"unknown integrand {name!r}")


# ---------------------------------------------------------------------------
# capture-recapture (Cormack-Jolly-Seber)

DIPPER_RELEASED = (22, 60, 78, 80, 88, 98)
DIPPER_RECAPTURED = (
    (11, 2, 0, 0, 0, 0),
    (0, 24, 1, 0, 0, 0),
    (0, 0, 34, 2, 0, 0),
    (0, 0, 0, 45, 1, 2),
    (0, 0, 0, 0, 51, 0),
    (0, 0, 0, 0, 0, 52),
)


@dataclass(frozen=True)
class CaptureData:
    """Release counts ``R`` and first-recapture counts.

    ``x[i, j]`` counts birds released in year ``i`` (0-based, i < 6) and first
    recaptured in year ``j`` (0-based over years 0..6, only ``j > i`` used).
    """

    R: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.int64)
        x = np.asarray(self.x, dtype=np.int64)
        I = R.shape[0]
        if x.shape != (I, I + 1):
            raise ValueError(f"recapture table must be {I}x{I + 1}")
        if np.any(R < 0) or np.any(x < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(np.tril(x) != 0):
            raise ValueError("recaptures must happen after release")
        if np.any(x.sum(axis=1) > R):
            raise ValueError("more recaptures than releases in some row")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "x", x)

    @property
    def n_release(self) -> int:
        return self.R.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.n_release

    @property
    def never_recaptured(self) -> np.ndarray:
        return self.R - self.x.sum(axis=1)

    def to_json(self) -> str:
        return json.dumps({"R": self.R.tolist(), "x": self.x.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CaptureData":
        obj = json.loads(text)
        return cls(obj["R"], obj["x"])


def dipper_data() -> CaptureData:
    table = np.zeros((6, 7), dtype=np.int64)
    for i, row in enumerate(DIPPER_RECAPTURED):
        table[i, 1:] = row
    return CaptureData(np.array(DIPPER_RELEASED), table)


def _split_theta(data: CaptureData, theta: np.ndarray):
    I = data.n_release
    surv = theta[:, :I]  # phi_1..phi_I
    recap = np.ones((theta.shape[0], I + 1))  # p_1 unused, p_2..p_{I+1}
    recap[:, 1:] = theta[:, I:]
    return surv, recap


def capture_nu(data: CaptureData, theta) -> np.ndarray:
    """First-recapture probabilities, shape ``(n, I, I+1)`` (zero for j <= i)."""
    pts, single = _as_batch(theta, data.dim)
    surv, recap = _split_theta(data, pts)
    I = data.n_release
    nu = np.zeros((pts.shape[0], I, I + 1))
    for i in range(I):
        carry = surv[:, i].copy()
        for j in range(i + 1, I + 1):
            nu[:, i, j] = carry * recap[:, j]
            if j < I:
                carry = carry * surv[:, j] * (1.0 - recap[:, j])
    return nu[0] if single else nu


def capture_loglik(data: CaptureData, theta):
    """Log-likelihood; ``-inf`` where a term with positive count has probability 0."""
    pts, single = _as_batch(theta, data.dim)
    if np.any((pts < 0.0) | (pts > 1.0)):
        raise ValueError("capture parameters live in [0, 1]^12")
    surv, recap = _split_theta(data, pts)
    I = data.n_release
    r = data.never_recaptured
    out = np.zeros(pts.shape[0])
    with np.errstate(divide="ignore"):
        for i in range(I):
            carry = surv[:, i].copy()
            seen = np.zeros(pts.shape[0])
            for j in range(i + 1, I + 1):
                nu = carry * recap[:, j]
                seen += nu
                if data.x[i, j] > 0:
                    out += data.x[i, j] * np.log(nu)
                if j < I:
                    carry *= surv[:, j] * (1.0 - recap[:, j])
            if r[i] > 0:
                out += r[i] * np.log(np.clip(1.0 - seen, 0.0, None))
    return float(out[0]) if single else out


def capture_likelihood(data: CaptureData, theta):
    return np.exp(capture_loglik(data, theta))


# ---------------------------------------------------------------------------
# sonar logistic regression

SONAR_ROWS = 208
SONAR_FEATURES = 60


class SonarFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SonarData:
    X: np.ndarray  # intercept column first
    y: np.ndarray  # +1 metal (M), -1 rock (R)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def load_sonar(path, expected_rows: int | None = SONAR_ROWS, n_features: int = SONAR_FEATURES) -> SonarData:
    """Parse the UCI sonar CSV (no header, 60 floats then R/M)."""
    labels = {"M": 1.0, "R": -1.0}
    rows, ys = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not s.strip() for s in rec):
                continue
            if len(rec) != n_features + 1:
                raise SonarFormatError(
                    f"{path}:{lineno}: expected {n_features + 1} fields, got {len(rec)}"
                )
            try:
                feats = [float(s) for s in rec[:-1]]
            except ValueError as exc:
                raise SonarFormatError(f"{path}:{lineno}: {exc}") from None
            lab = rec[-1].strip()
            if lab not in labels:
                raise SonarFormatError(f"{path}:{lineno}: unknown label {lab!r}")
            rows.append(feats)
            ys.append(labels[lab])
    if expected_rows is not None and len(rows) != expected_rows:
        raise SonarFormatError(f"{path}: expected {expected_rows} rows, found {len(rows)}")
    X = np.hstack([np.ones((len(rows), 1)), np.asarray(rows, dtype=float).reshape(len(rows), n_features)])
    return SonarData(X, np.asarray(ys))


def sonar_loglik(data: SonarData, theta):
    """``-sum_i log(1 + exp(-y_i <X_i, theta>))`` for theta in [-1, 1]^p."""
    pts, single = _as_batch(theta, data.dim)
    margins = (pts @ data.X.T) * data.y
    out = -np.logaddexp(0.0, -margins).sum(axis=1)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# evidence integrands on the unit cube


@dataclass
class EvidenceModel:
    """Log-likelihood pulled back to ``[0, 1]^d`` under a uniform prior.

    The evidence is ``Z = E_U[exp(loglik(u))]`` with ``u`` uniform on the unit
    cube.  ``integrand(shift)`` returns ``exp(loglik - shift)`` so that the
    estimate stays in floating-point range; ``log Z = shift + log(estimate)``.
    """

    name: str
    dim: int
    loglik_unit: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def integrand(self, shift: float) -> Integrand:
        def f(u):
            return np.exp(self.loglik_unit(u) - shift)

        return Integrand(f"{self.name}_evidence", self.dim, f)

    def pilot_shift(self, n_pilot: int = 1000, seed: int = 0) -> float:
        u = np.random.default_rng(seed).random((n_pilot, self.dim))
        return float(np.max(self.loglik_unit(u)))


def capture_model(data: CaptureData | None = None) -> EvidenceModel:
    data = dipper_data() if data is None else data
    return EvidenceModel("capture", data.dim, lambda u: capture_loglik(data, u))


def sonar_model(data: SonarData) -> EvidenceModel:
    # theta = 2u - 1; the 2^-p prior density cancels the Jacobian 2^p
    return EvidenceModel("sonar", data.dim, lambda u: sonar_loglik(data, 2.0 * u - 1.0))
