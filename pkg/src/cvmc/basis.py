"""Tensor-product control variates on the unit cube.

Every control function has zero mean under the uniform law on ``[0, 1]^d``.
Two univariate families are available: shifted Legendre polynomials
``h_j(x) = L_j(2x - 1)`` and the Fourier family on ``[0, 1]``.  Multivariate
controls are products ``h_l(x) = prod_j h_{l_j}(x_j)`` with ``h_0 = 1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

DEFAULT_MAX_INDICES = 10**6


class Family(str, Enum):
    LEGENDRE = "legendre"
    FOURIER = "fourier"

    @classmethod
    def parse(cls, value: "Family | str") -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).lower().replace("_", "").replace("-", "")
        if key in ("legendre", "legendreshifted", "shiftedlegendre"):
            return cls.LEGENDRE
        if key == "fourier":
            return cls.FOURIER
        raise ValueError(f"unknown basis family {value!r}")


# ---------------------------------------------------------------------------
# univariate families


def legendre_table(x, k: int) -> np.ndarray:
    """Values of ``L_0(2x-1), ..., L_k(2x-1)`` stacked on a trailing axis.

    Uses the Bonnet recurrence ``(j+1) L_{j+1} = (2j+1) t L_j - j L_{j-1}``.
    """
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("Legendre controls are defined on [0, 1]")
    t = 2.0 * x - 1.0
    out = np.empty(x.shape + (k + 1,))
    out[..., 0] = 1.0
    if k >= 1:
        out[..., 1] = t
    for j in range(1, k):
        out[..., j + 1] = ((2 * j + 1) * t * out[..., j] - j * out[..., j - 1]) / (j + 1)
    return out


def legendre_eval(j: int, x):
    """Shifted Legendre polynomial ``L_j(2x - 1)`` for ``x`` in [0, 1]."""
    if j < 0:
        raise ValueError("degree must be nonnegative")
    val = legendre_table(x, j)[..., j]
    return float(val) if np.ndim(val) == 0 else val


def fourier_eval(j: int, x):
    """``sqrt(2) cos((j+1) pi x)`` for odd ``j``, ``sqrt(2) sin(j pi x)`` for even ``j``."""
    if j < 1:
        raise ValueError("Fourier controls are indexed from 1")
    x = np.asarray(x, dtype=float)
    if j % 2 == 1:
        val = np.sqrt(2.0) * np.cos((j + 1) * np.pi * x)
    else:
        val = np.sqrt(2.0) * np.sin(j * np.pi * x)
    return float(val) if val.ndim == 0 else val


def fourier_table(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (k + 1,))
    out[..., 0] = 1.0
    for j in range(1, k + 1):
        out[..., j] = fourier_eval(j, x)
    return out


# ---------------------------------------------------------------------------
# multi-indices


@dataclass(frozen=True, order=True)
class MultiIndex:
    degrees: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(v) for v in self.degrees))
        if any(v < 0 for v in self.degrees):
            raise ValueError("degrees must be nonnegative")
        if not any(self.degrees):
            raise ValueError("the all-zero multi-index is the constant, not a control")

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    @property
    def d(self) -> int:
        return len(self.degrees)


@lru_cache(maxsize=None)
def _count_exact(d: int, k: int, t: int, order: int) -> int:
    """Vectors in {0..k}^d summing to t with at most ``order`` nonzero entries."""
    if t < 0 or order < 0:
        return 0
    if d == 0:
        return 1 if t == 0 else 0
    total = _count_exact(d - 1, k, t, order)
    for v in range(1, min(k, t) + 1):
        total += _count_exact(d - 1, k, t - v, order - 1)
    return total


def count_indices(d: int, k: int, deg: int, order: int | None = None) -> int:
    """Number of nonzero multi-indices with entries <= k and total degree <= deg."""
    order = d if order is None else min(order, d)
    return sum(_count_exact(d, k, t, order) for t in range(1, min(deg, k * d) + 1))


def _compositions(d: int, k: int, t: int, order: int) -> Iterator[tuple[int, ...]]:
    # lexicographic order: first coordinate ascending
    if d == 0:
        if t == 0:
            yield ()
        return
    for v in range(0, min(k, t) + 1):
        left = order - (v > 0)
        if left < 0:
            continue
        if _count_exact(d - 1, k, t - v, left) == 0:
            continue
        for rest in _compositions(d - 1, k, t - v, left):
            yield (v,) + rest


def enumerate_index_array(
    d: int, k: int, deg: int, order: int | None = None, max_count: int = DEFAULT_MAX_INDICES
) -> np.ndarray:
    """Integer array (m, d) of multi-indices sorted by total degree, ties lexicographic."""
    if d < 1 or k < 1 or deg < 1:
        raise ValueError(f"need d, k, deg >= 1, got d={d}, k={k}, deg={deg}")
    order = d if order is None else order
    if order < 1:
        raise ValueError("order must be >= 1")
    m = count_indices(d, k, deg, order)
    if m > max_count:
        raise ValueError(f"{m} control variates exceed the cap of {max_count}")
    out = np.empty((m, d), dtype=np.int64)
    row = 0
    for t in range(1, min(deg, k * d) + 1):
        for comp in _compositions(d, k, t, min(order, d)):
            out[row] = comp
            row += 1
    assert row == m
    return out


def enumerate_indices(
    d: int, k: int, deg: int, max_count: int = DEFAULT_MAX_INDICES
) -> list[MultiIndex]:
    return [MultiIndex(tuple(r)) for r in enumerate_index_array(d, k, deg, max_count=max_count)]


# ---------------------------------------------------------------------------
# basis specification


@dataclass
class BasisSpec:
    """A family of tensor-product controls.

    ``order`` optionally limits how many coordinates of a multi-index may be
    nonzero (1 or 2 give the additive / pairwise-interaction families used for
    high-dimensional problems).
    """

    family: Family
    d: int
    k: int
    deg: int
    order: int | None = None
    max_count: int = DEFAULT_MAX_INDICES
    index_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.family = Family.parse(self.family)
        if self.family is Family.FOURIER and self.d != 1:
            raise ValueError("the Fourier family is only defined on [0, 1] (d = 1)")
        self.index_array = enumerate_index_array(self.d, self.k, self.deg, self.order, self.max_count)
        self.index_array.setflags(write=False)

    @property
    def m(self) -> int:
        return self.index_array.shape[0]

    @property
    def indices(self) -> list[MultiIndex]:
        return [MultiIndex(tuple(r)) for r in self.index_array]

    @property
    def total_degrees(self) -> np.ndarray:
        return self.index_array.sum(axis=1)

    def prefix_size(self, deg: int) -> int:
        """Number of leading columns whose total degree is <= deg."""
        return int(np.searchsorted(self.total_degrees, deg, side="right"))

    def to_dict(self) -> dict:
        out = {"family": self.family.value, "d": self.d, "k": self.k, "deg": self.deg}
        if self.order is not None:
            out["order"] = self.order
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "BasisSpec":
        return cls(
            family=obj.get("family", "legendre"),
            d=int(obj["d"]),
            k=int(obj["k"]),
            deg=int(obj["deg"]),
            order=None if obj.get("order") is None else int(obj["order"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "BasisSpec":
        return cls.from_dict(json.loads(text))


def _univariate_table(spec: BasisSpec, x) -> np.ndarray:
    if spec.family is Family.LEGENDRE:
        return legendre_table(x, spec.k)
    return fourier_table(x, spec.k)


def eval_control(spec: BasisSpec, idx: MultiIndex | Sequence[int], x) -> float:
    degrees = idx.degrees if isinstance(idx, MultiIndex) else tuple(int(v) for v in idx)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(degrees) != spec.d or x.shape != (spec.d,):
        raise ValueError("multi-index and point must both have length spec.d")
    if max(degrees) > spec.k:
        raise ValueError("multi-index does not belong to this basis")
    table = _univariate_table(spec, x)
    return float(np.prod([table[j, degrees[j]] for j in range(spec.d)]))


def build_design(spec: BasisSpec, points, columns: int | None = None) -> np.ndarray:
    """Design matrix ``H[i, j] = h_{l_j}(x_i)``; ``columns`` keeps only a prefix."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if spec.d == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != spec.d:
        raise ValueError(f"points have shape {pts.shape}, expected (n, {spec.d})")
    L = spec.index_array if columns is None else spec.index_array[:columns]
    n, m = pts.shape[0], L.shape[0]
    table = _univariate_table(spec, pts)  # (n, d, k+1)
    H = np.ones((n, m))
    for c in range(spec.d):
        cols = np.flatnonzero(L[:, c])
        if cols.size:
            H[:, cols] *= table[:, c, L[cols, c]]
    return H


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class BasisDiagnostics:
    gram_diagonal: np.ndarray
    gamma: float
    u_h: float
    b_bound: float


def diagnostics(spec: BasisSpec) -> BasisDiagnostics:
    """Closed-form Gram diagonal, smallest eigenvalue, sup bound and a bound on B.

    Both families are orthogonal, so the Gram matrix is diagonal.  For Legendre
    the bound ``sum 1/G_ll`` is attained at the corner ``x = (1, ..., 1)`` and is
    therefore the exact value of ``sup_x h(x)^T G^{-1} h(x)``.
    """
    if spec.family is Family.LEGENDRE:
        gram = np.prod(1.0 / (2.0 * spec.index_array + 1.0), axis=1)
        return BasisDiagnostics(gram, float(gram.min()), 1.0, float(np.sum(1.0 / gram)))
    gram = np.ones(spec.m)
    return BasisDiagnostics(gram, 1.0, float(np.sqrt(2.0)), 2.0 * spec.m)


def leverage(spec: BasisSpec, points) -> np.ndarray:
    """``h(x)^T G^{-1} h(x)`` at each point (diagonal Gram)."""
    H = build_design(spec, points)
    return (H**2 / diagnostics(spec).gram_diagonal).sum(axis=1)


def b_witness(spec: BasisSpec, n_points: int = 10**5, seed: int = 0) -> float:
    """Lower witness for B: max leverage over random points and the all-ones corner."""
    rng = np.random.default_rng(seed)
    best = float(leverage(spec, np.ones((1, spec.d)))[0])
    chunk = max(1, min(n_points, 2_000_000 // max(spec.m, 1)))
    done = 0
    while done < n_points:
        size = min(chunk, n_points - done)
        best = max(best, float(leverage(spec, rng.random((size, spec.d))).max()))
        done += size
    return best
