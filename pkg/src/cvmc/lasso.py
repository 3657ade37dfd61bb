"""Cyclical coordinate descent for the centered LASSO problem.

Solves ``min_b (1/2n) ||y - Z b||^2 + lam ||b||_1`` where ``Z`` is the
column-centered design, by default divided column-wise by its empirical
standard deviation.  Two kernels share the same update rule:

* residual mode keeps ``r = y - Z b`` and costs O(n) per coordinate;
* Gram mode keeps ``g = Z^T r / n`` and costs O(m) per coordinate after an
  O(n m^2) precomputation.  It is used when ``m <= n`` and ``m`` is moderate.

Both alternate full sweeps with sweeps restricted to the current support and
stop once a full sweep moves no coordinate by more than ``tol``.
"""
from __future__ import annotations

import math

import numba
import numpy as np

GRAM_MAX_M = 4000


@numba.njit(cache=True, nogil=True)
def _soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@numba.njit(cache=True, nogil=True)
def _cd_residual(Zt, diag, skip, r, b, lam, max_sweeps, tol, hist):
    m, n = Zt.shape
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        maxd = 0.0
        for j in range(m):
            if skip[j] or (not full and b[j] == 0.0):
                continue
            acc = 0.0
            for i in range(n):
                acc += Zt[j, i] * r[i]
            old = b[j]
            new = _soft(acc / n + diag[j] * old, lam) / diag[j]
            if new != old:
                delta = new - old
                for i in range(n):
                    r[i] -= delta * Zt[j, i]
                b[j] = new
                dd = abs(delta) * math.sqrt(diag[j])
                if dd > maxd:
                    maxd = dd
        rss = 0.0
        for i in range(n):
            rss += r[i] * r[i]
        l1 = 0.0
        for j in range(m):
            l1 += abs(b[j])
        hist[sweeps] = rss / (2.0 * n) + lam * l1
        sweeps += 1
        if maxd < tol:
            if full:
                break
            full = True
        else:
            full = False
    return sweeps


@numba.njit(cache=True, nogil=True)
def _cd_gram(G, diag, skip, g, q, yy, b, lam, max_sweeps, tol, hist):
    m = G.shape[0]
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        maxd = 0.0
        for j in range(m):
            if skip[j] or (not full and b[j] == 0.0):
                continue
            old = b[j]
            new = _soft(g[j] + diag[j] * old, lam) / diag[j]
            if new != old:
                delta = new - old
                for k in range(m):
                    g[k] -= delta * G[j, k]
                b[j] = new
                dd = abs(delta) * math.sqrt(diag[j])
                if dd > maxd:
                    maxd = dd
        # (1/2n)||y - Zb||^2 = yy/2 - b.q + b.(q - g)/2
        quad = 0.0
        l1 = 0.0
        for j in range(m):
            quad += b[j] * (q[j] + g[j])
            l1 += abs(b[j])
        hist[sweeps] = 0.5 * yy - 0.5 * quad + lam * l1
        sweeps += 1
        if maxd < tol:
            if full:
                break
            full = True
        else:
            full = False
    return sweeps


class LassoProblem:
    """Centered LASSO problem with cached standardization and Gram matrix.

    ``H_c`` and ``y`` must already be column-centered.  Coefficients handled by
    :meth:`solve` live on the working (standardized) scale; use
    :meth:`to_original` to map them back.
    """

    def __init__(self, H_c, y, standardize: bool = True, mode: str = "auto"):
        H_c = np.asarray(H_c, dtype=float)
        y = np.asarray(y, dtype=float)
        if H_c.ndim != 2 or y.shape != (H_c.shape[0],):
            raise ValueError("shape mismatch between design and response")
        if not (np.all(np.isfinite(H_c)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite values in LASSO inputs")
        self.n, self.m = H_c.shape
        self.standardize = standardize
        norms = np.sqrt(np.einsum("ij,ij->j", H_c, H_c))
        floor = 1e-12 * max(float(norms.max(initial=0.0)), 1e-300)
        self.skip = norms <= floor
        if standardize:
            self.scale = np.where(self.skip, 1.0, norms / math.sqrt(self.n))
        else:
            self.scale = np.ones(self.m)
        Zt = np.ascontiguousarray(H_c.T / self.scale[:, None])
        Zt[self.skip] = 0.0
        self.Zt = Zt
        self.diag = np.where(self.skip, 1.0, np.einsum("ij,ij->i", Zt, Zt) / self.n)
        self.y = np.ascontiguousarray(y)
        self.q = Zt @ y / self.n
        self.yy = float(y @ y) / self.n
        if mode == "auto":
            mode = "gram" if self.m <= min(self.n, GRAM_MAX_M) else "residual"
        if mode not in ("gram", "residual"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self._gram = None

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = np.ascontiguousarray(self.Zt @ self.Zt.T / self.n)
        return self._gram

    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.q), initial=0.0))

    def gradient(self, b) -> np.ndarray:
        """``Z^T (y - Z b) / n`` on the working scale."""
        return self.q - self.Zt @ (self.Zt.T @ np.asarray(b, dtype=float)) / self.n

    def objective(self, b, lam: float) -> float:
        r = self.y - self.Zt.T @ b
        return float(r @ r) / (2 * self.n) + lam * float(np.abs(b).sum())

    def solve(self, lam: float, b0=None, max_sweeps: int = 1000, tol: float = 1e-7,
              return_history: bool = False):
        """Coordinate descent from ``b0`` (warm start). Returns ``(b, sweeps)``."""
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        b = np.zeros(self.m) if b0 is None else np.array(b0, dtype=float)
        b[self.skip] = 0.0
        hist = np.empty(max(max_sweeps, 1))
        if self.mode == "gram":
            g = self.q - self.gram @ b
            sweeps = _cd_gram(self.gram, self.diag, self.skip, g, self.q, self.yy, b,
                              float(lam), max_sweeps, tol, hist)
        else:
            r = self.y - self.Zt.T @ b
            sweeps = _cd_residual(self.Zt, self.diag, self.skip, r, b, float(lam),
                                  max_sweeps, tol, hist)
        if return_history:
            return b, sweeps, hist[:sweeps].copy()
        return b, sweeps

    def to_original(self, b) -> np.ndarray:
        out = np.asarray(b, dtype=float) / self.scale
        out[self.skip] = 0.0
        return out

    def from_original(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float) * self.scale
