"""The simplex lattice of color counts (the support of the order parameter).

Classes are ordered lexicographically on their count vectors; `index_of` is the closed-form
rank in that order, so lookups never need a hash table.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .errors import LatticeSizeError, ModelError
from .model import ColorCount

logger = logging.getLogger(__name__)

MAX_CLASSES = 5_000_000


def lattice_size(N: int, q: int) -> int:
    return comb(N + q - 1, q - 1)


def _comb_array(n: np.ndarray, k: int) -> np.ndarray:
    """Exact C(n, k) for an int64 array n >= 0 (zero where n < k)."""
    n = np.asarray(n, dtype=np.int64)
    out = np.ones_like(n)
    for j in range(1, k + 1):
        out = out * (n - k + j) // j
    return np.where(n >= k, out, 0)


@lru_cache(maxsize=64)
def _compositions(total: int, parts: int) -> np.ndarray:
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    if parts == 2:
        first = np.arange(total + 1, dtype=np.int64)
        out = np.column_stack([first, total - first])
        out.setflags(write=False)
        return out
    blocks = []
    for first in range(total + 1):
        rest = _compositions(total - first, parts - 1)
        head = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


@dataclass(eq=False)
class SimplexLattice:
    N: int
    q: int
    counts: np.ndarray
    _neighbors: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return int(self.counts.shape[0])

    def __len__(self) -> int:
        return self.size

    def class_at(self, index: int) -> ColorCount:
        return ColorCount(tuple(self.counts[index].tolist()))

    def index_of(self, n: Union[ColorCount, Sequence[int], np.ndarray]) -> Union[int, np.ndarray]:
        """Lexicographic rank of one count vector, or of each row of an (k, q) array."""
        arr = np.asarray(n.counts if isinstance(n, ColorCount) else n, dtype=np.int64)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.q:
            raise ModelError(f"expected {self.q} colors, got {arr.shape[1]}")
        if np.any(arr < 0) or np.any(arr.sum(axis=1) != self.N):
            raise ModelError(f"counts must be nonnegative and sum to N={self.N}")
        remaining = np.full(arr.shape[0], self.N, dtype=np.int64)
        rank = np.zeros(arr.shape[0], dtype=np.int64)
        for i in range(self.q - 1):
            k = self.q - 1 - i
            v = arr[:, i]
            rank += _comb_array(remaining + k, k) - _comb_array(remaining - v + k, k)
            remaining = remaining - v
        return int(rank[0]) if single else rank

    @property
    def sum_sq(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.counts, self.counts)

    @property
    def energies(self) -> np.ndarray:
        return self.sum_sq / (2.0 * self.N)

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.N

    @property
    def log_sizes(self) -> np.ndarray:
        return gammaln(self.N + 1) - gammaln(self.counts + 1).sum(axis=1)

    @property
    def neighbors(self) -> np.ndarray:
        """(L, q, q) table: index of n + e_dst - e_src, or -1 when src == dst or n_src == 0."""
        if self._neighbors is None:
            table = np.full((self.size, self.q, self.q), -1, dtype=np.int64)
            for src in range(self.q):
                movable = self.counts[:, src] > 0
                for dst in range(self.q):
                    if src == dst:
                        continue
                    moved = self.counts[movable].copy()
                    moved[:, src] -= 1
                    moved[:, dst] += 1
                    table[movable, src, dst] = self.index_of(moved)
            table.setflags(write=False)
            self._neighbors = table
        return self._neighbors

    def l1_distance(self, center: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        return np.abs(self.fractions - np.asarray(center, dtype=float)).sum(axis=1)

    def sq_norm(self) -> np.ndarray:
        """||n/N||_2^2 per class."""
        return self.sum_sq / float(self.N * self.N)

    @property
    def balanced_index(self) -> int:
        """Class nearest to (1/q, ..., 1/q): the remainder goes to the leading colors."""
        base, rem = divmod(self.N, self.q)
        counts = [base + 1] * rem + [base] * (self.q - rem)
        return self.index_of(counts)

    def permutation_map(self, perm: Sequence[int]) -> np.ndarray:
        """Index of the color-permuted class for every class."""
        return self.index_of(self.counts[:, list(perm)])


def enumerate_lattice(N: int, q: int = 3, max_classes: int = MAX_CLASSES) -> SimplexLattice:
    if N < 1 or q < 2:
        raise ModelError(f"need N >= 1 and q >= 2, got N={N}, q={q}")
    size = lattice_size(N, q)
    if size > max_classes:
        raise LatticeSizeError(
            f"lattice for N={N}, q={q} has {size} classes (limit {max_classes})"
        )
    counts = _compositions(N, q)
    return SimplexLattice(N=N, q=q, counts=counts)


def log_class_size(n: ColorCount) -> float:
    """log of the multinomial coefficient N! / prod n_c!."""
    arr = n.as_array()
    return float(gammaln(n.N + 1) - gammaln(arr + 1).sum())
