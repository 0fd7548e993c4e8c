"""Energy bands, the temperature ladder and the per-level band record."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Tuple, Union

import numpy as np

from .errors import EnergyRangeError, ModelError
from .lattice import SimplexLattice
from .model import ColorCount

logger = logging.getLogger(__name__)

ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class EnergyBands:
    """M equidistant bands between h_0 = N/(2q) and h_M = N/2; the first band is closed."""

    N: int
    M: int
    q: int = 3
    d: float = 1.0

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ModelError(f"need at least one band, got M={self.M}")

    @classmethod
    def from_density(cls, N: int, d: float = 1.0, q: int = 3) -> "EnergyBands":
        if d <= 0:
            raise ModelError(f"band density d must be positive, got {d}")
        return cls(N=N, M=max(1, int(round(d * N))), q=q, d=d)

    @property
    def h_min(self) -> float:
        return self.N / (2.0 * self.q)

    @property
    def h_max(self) -> float:
        return self.N / 2.0

    @property
    def width(self) -> float:
        return (self.h_max - self.h_min) / self.M

    @property
    def h(self) -> np.ndarray:
        return self.h_min + self.width * np.arange(self.M + 1)

    @property
    def sq_norm_width(self) -> float:
        """Band width in units of ||m||_2^2, i.e. (q-1)/(qM)."""
        return (self.q - 1) / (self.q * self.M)

    def band_of_counts(self, counts: Union[ColorCount, np.ndarray]) -> Union[int, np.ndarray]:
        """Exact band index from integer counts: max(1, ceil((q S - N^2) M / (N^2 (q-1))))."""
        arr = np.asarray(counts.counts if isinstance(counts, ColorCount) else counts, dtype=np.int64)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        num = (self.q * np.einsum("ij,ij->i", arr, arr) - self.N * self.N) * self.M
        den = self.N * self.N * (self.q - 1)
        k = np.maximum(1, -((-num) // den))
        return int(k[0]) if single else k

    def bands_of(self, lattice: SimplexLattice) -> np.ndarray:
        return self.band_of_counts(lattice.counts)


def band_index(energy: float, bands: EnergyBands) -> int:
    """The k with h_{k-1} < energy <= h_k; energy = h_0 belongs to band 1."""
    lo, hi = bands.h_min, bands.h_max
    tol = ENERGY_TOL * max(1.0, hi)
    if energy < lo - tol or energy > hi + tol:
        raise EnergyRangeError(f"energy {energy!r} outside [{lo}, {hi}]")
    k = math.ceil((energy - lo) / bands.width - ENERGY_TOL)
    return min(bands.M, max(1, k))


@dataclass(frozen=True)
class TemperatureLadder:
    beta: float
    M: int

    def __post_init__(self) -> None:
        if self.M < 1 or self.beta < 0:
            raise ModelError(f"invalid ladder beta={self.beta}, M={self.M}")

    @property
    def betas(self) -> np.ndarray:
        return self.beta * np.arange(self.M + 1) / self.M

    def __getitem__(self, i: int) -> float:
        return float(self.betas[i])

    def __len__(self) -> int:
        return self.M + 1


@dataclass(eq=False)
class BandRecord:
    """Classes seen so far, per (temperature level, band).

    Cell (i, k) holds classes whose energy lies in band k; an empty cell stands for a row of
    unfilled slots. Cells only ever gain members.
    """

    lattice: SimplexLattice
    bands: EnergyBands
    present: np.ndarray = field(repr=False)
    class_band: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, lattice: SimplexLattice, bands: EnergyBands) -> "BandRecord":
        if (lattice.N, lattice.q) != (bands.N, bands.q):
            raise ModelError(
                f"bands built for N={bands.N}, q={bands.q} but lattice has N={lattice.N}, q={lattice.q}"
            )
        present = np.zeros((bands.M + 1, lattice.size), dtype=bool)
        return cls(lattice, bands, present, bands.bands_of(lattice))

    @property
    def levels(self) -> int:
        return self.present.shape[0]

    @property
    def complete(self) -> bool:
        return bool(self.present.all())

    def add(self, level: int, index: int) -> bool:
        """Record a class at a level; True when it was new."""
        if self.present[level, index]:
            return False
        self.present[level, index] = True
        return True

    def contains(self, level: int, index: int) -> bool:
        return bool(self.present[level, index])

    def members(self, level: int, band: int) -> np.ndarray:
        return np.flatnonzero(self.present[level] & (self.class_band == band))

    def cell_sizes(self) -> np.ndarray:
        """(levels, M) matrix of member counts."""
        out = np.zeros((self.levels, self.bands.M), dtype=np.int64)
        for i in range(self.levels):
            out[i] = np.bincount(
                self.class_band[self.present[i]] - 1, minlength=self.bands.M
            )[: self.bands.M]
        return out

    def cells(self) -> Iterator[Tuple[int, int, np.ndarray]]:
        for i in range(self.levels):
            for k in range(1, self.bands.M + 1):
                yield i, k, self.members(i, k)

    def copy(self) -> "BandRecord":
        return BandRecord(self.lattice, self.bands, self.present.copy(), self.class_band)


def populate_m0(lattice: SimplexLattice, bands: EnergyBands) -> BandRecord:
    """The best-case record: every cell holds every class of its band."""
    record = BandRecord.empty(lattice, bands)
    record.present[:] = True
    return record
