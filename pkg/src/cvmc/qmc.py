"""Plain (unscrambled) Halton sequence starting at index 1."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 20


def first_primes(count: int) -> list[int]:
    primes: list[int] = []
    cand = 2
    while len(primes) < count:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return primes


def radical_inverse(base: int, i: int) -> float:
    """Digits of ``i`` in ``base`` mirrored about the radix point."""
    if base < 2 or i < 1:
        raise ValueError("need base >= 2 and i >= 1")
    out, scale = 0.0, 1.0 / base
    while i:
        i, digit = divmod(i, base)
        out += digit * scale
        scale /= base
    return out


def _radical_inverse_array(base: int, idx: np.ndarray) -> np.ndarray:
    idx = idx.astype(np.int64)
    out = np.zeros(idx.shape)
    scale = 1.0 / base
    while np.any(idx):
        idx, digit = np.divmod(idx, base)
        out += digit * scale
        scale /= base
    return out


def halton_points(d: int, n: int, start: int = 1, max_dim: int = MAX_DIM) -> np.ndarray:
    """Rows ``start .. start+n-1`` of the ``d``-dimensional Halton sequence."""
    if d < 1 or d > max_dim:
        raise ValueError(f"Halton dimension must lie in [1, {max_dim}], got {d}")
    if start < 1:
        raise ValueError("Halton indices start at 1")
    idx = np.arange(start, start + n)
    return np.column_stack([_radical_inverse_array(b, idx) for b in first_primes(d)]).reshape(n, d)


@dataclass
class HaltonState:
    dim: int
    next_index: int = 1
    bases: list[int] = field(init=False)

    def __post_init__(self):
        self.bases = first_primes(self.dim)

    def draw(self, n: int) -> np.ndarray:
        pts = halton_points(self.dim, n, self.next_index)
        self.next_index += n
        return pts
