"""Trajectory simulation: spin-level and lumped Metropolis, and the multi-replica
equi-energy sampler on color counts.

The replica system stores each coordinate as a lattice index; `states` rebuilds the
ColorCount view. One sweep draws (j, k, l) uniformly from {0..M} and applies a jump at
level j, a Metropolis move of coordinate k at beta_k, then a jump at level l.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .bands import BandRecord, EnergyBands, TemperatureLadder, populate_m0
from .errors import FitError, ModelError
from .kernels import jump_proposal_log_weights
from .lattice import SimplexLattice, enumerate_lattice
from .model import ColorCount, ModelParams, SpinConfiguration

logger = logging.getLogger(__name__)

RECORD_MODES = ("m0", "live")


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 stream for (seed, key); distinct keys give independent streams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


# --- Single-chain moves -----------------------------------------------------------
def kgen_step(sigma: SpinConfiguration, rng: np.random.Generator) -> SpinConfiguration:
    """Hold with probability 1/2, else recolor a uniform site to a uniform other color."""
    if rng.random() < 0.5:
        return sigma
    site = int(rng.integers(sigma.N))
    shift = int(rng.integers(1, sigma.q))
    color = (sigma.colors[site] - 1 + shift) % sigma.q + 1
    return sigma.recolor(site, color)


def _accept(delta_h: float, beta: float, rng: np.random.Generator) -> bool:
    if delta_h >= 0:
        return True
    return rng.random() < math.exp(beta * delta_h)


def _propose_pair(counts: Sequence[int], rng: np.random.Generator) -> Optional[Tuple[int, int]]:
    """(src, dst) color pair with probability n_src / (2N(q-1)), or None for the hold."""
    if rng.random() < 0.5:
        return None
    q = len(counts)
    site = int(rng.integers(sum(counts)))
    src = 0
    acc = counts[0]
    while site >= acc:
        src += 1
        acc += counts[src]
    dst = (src + int(rng.integers(1, q))) % q
    return src, dst


@singledispatch
def metropolis_step(state, beta: float, rng: np.random.Generator):
    raise TypeError(f"no Metropolis step for {type(state).__name__}")


@metropolis_step.register
def _(state: ColorCount, beta: float, rng: np.random.Generator) -> ColorCount:
    pair = _propose_pair(state.counts, rng)
    if pair is None:
        return state
    src, dst = pair
    delta_h = (state.counts[dst] - state.counts[src] + 1) / state.N
    return state.move(src, dst) if _accept(delta_h, beta, rng) else state


@metropolis_step.register
def _(state: SpinConfiguration, beta: float, rng: np.random.Generator) -> SpinConfiguration:
    proposal = kgen_step(state, rng)
    if proposal is state:
        return state
    site = next(i for i, (a, b) in enumerate(zip(state.colors, proposal.colors)) if a != b)
    src, dst = state.colors[site], proposal.colors[site]
    n_src = state.colors.count(src)
    n_dst = state.colors.count(dst)
    delta_h = (n_dst - n_src + 1) / state.N
    return proposal if _accept(delta_h, beta, rng) else state


def _lumped_index_step(lattice: SimplexLattice, index: int, beta: float, rng: np.random.Generator) -> int:
    counts = lattice.counts[index]
    pair = _propose_pair(counts, rng)
    if pair is None:
        return index
    src, dst = pair
    delta_h = (int(counts[dst]) - int(counts[src]) + 1) / lattice.N
    if _accept(delta_h, beta, rng):
        return int(lattice.neighbors[index, src, dst])
    return index


# --- Replica system ---------------------------------------------------------------
@dataclass(eq=False)
class ReplicaSystem:
    lattice: SimplexLattice
    ladder: TemperatureLadder
    bands: EnergyBands
    record: BandRecord
    indices: np.ndarray
    rng_seed: int = 0
    step_count: int = 0
    live: bool = False
    rule: str = "tempered"
    _cells: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)
    _log_w: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def create(
        cls,
        N: int,
        beta: float,
        d: float = 1.0,
        q: int = 3,
        record: str = "m0",
        rule: str = "tempered",
        seed: int = 0,
        start: Optional[Sequence[int]] = None,
        lattice: Optional[SimplexLattice] = None,
    ) -> "ReplicaSystem":
        """All coordinates start at `start` (default: the balanced class)."""
        if record not in RECORD_MODES:
            raise ModelError(f"record mode must be one of {RECORD_MODES}, got {record!r}")
        ModelParams(N=N, q=q, beta=beta)
        lattice = lattice or enumerate_lattice(N, q)
        bands = EnergyBands.from_density(N, d, q)
        ladder = TemperatureLadder(beta, bands.M)
        rec = populate_m0(lattice, bands) if record == "m0" else BandRecord.empty(lattice, bands)
        first = lattice.balanced_index if start is None else lattice.index_of(start)
        indices = np.full(bands.M + 1, first, dtype=np.int64)
        return cls(lattice, ladder, bands, rec, indices, rng_seed=seed, live=(record == "live"), rule=rule)

    @property
    def M(self) -> int:
        return self.bands.M

    @property
    def states(self) -> List[ColorCount]:
        return [self.lattice.class_at(i) for i in self.indices]

    @property
    def top(self) -> ColorCount:
        return self.lattice.class_at(self.indices[-1])

    def _cell(self, level: int, band: int) -> Tuple[np.ndarray, np.ndarray]:
        key = (level, band)
        cached = self._cells.get(key)
        if cached is None:
            members = self.record.members(level, band)
            if level not in self._log_w:
                self._log_w[level] = jump_proposal_log_weights(
                    self.lattice, self.ladder[level], self.rule
                )
            if members.size:
                lw = self._log_w[level][members]
                cdf = np.cumsum(np.exp(lw - logsumexp(lw)))
            else:
                cdf = np.zeros(0)
            cached = (members, cdf)
            self._cells[key] = cached
        return cached

    def record_visit(self, level: int, index: int) -> None:
        if self.record.add(level, index):
            band = int(self.record.class_band[index])
            self._cells.pop((level, band), None)


def ee_step(system: ReplicaSystem, level: int, rng: np.random.Generator) -> ReplicaSystem:
    """Equi-energy jump of coordinate `level` into record cell (level - 1, current band)."""
    if level == 0:
        return system
    if not 1 <= level <= system.M:
        raise ModelError(f"level must lie in 0..{system.M}, got {level}")
    x = int(system.indices[level])
    band = int(system.record.class_band[x])
    members, cdf = system._cell(level - 1, band)
    if members.size == 0:
        return system
    j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    y = int(members[min(j, members.size - 1)])
    energies = system.lattice.energies
    dbeta = system.ladder[level] - system.ladder[level - 1]
    if _accept(dbeta * (energies[y] - energies[x]), 1.0, rng):
        system.indices[level] = y
    return system


def r_sweep(
    system: ReplicaSystem, rng: np.random.Generator, levels: Optional[Tuple[int, int, int]] = None
) -> ReplicaSystem:
    """One application of the composed kernel; `levels` fixes (j, k, l) instead of drawing them."""
    if levels is None:
        j, k, l = (int(v) for v in rng.integers(0, system.M + 1, size=3))
    else:
        j, k, l = levels
    ee_step(system, j, rng)
    system.indices[k] = _lumped_index_step(system.lattice, int(system.indices[k]), system.ladder[k], rng)
    if system.live:
        system.record_visit(k, int(system.indices[k]))
    ee_step(system, l, rng)
    system.step_count += 1
    return system


def escape_time(
    system: ReplicaSystem, epsilon: float, max_sweeps: int, rng: np.random.Generator
) -> Optional[int]:
    """Sweeps until the target coordinate is more than epsilon (1-norm) from the balanced point.

    None marks a timeout at max_sweeps.
    """
    q = system.lattice.q
    dist = system.lattice.l1_distance(np.full(q, 1.0 / q))
    for sweep in range(1, max_sweeps + 1):
        r_sweep(system, rng)
        if dist[system.indices[-1]] > epsilon:
            return sweep
    return None


# --- Trajectories -----------------------------------------------------------------
@dataclass
class Trajectory:
    q: int
    stride: int
    sweeps: np.ndarray
    fractions: np.ndarray
    energies: np.ndarray
    dist_a0: np.ndarray

    @property
    def header(self) -> List[str]:
        return ["sweep"] + [f"m{c + 1}" for c in range(self.q)] + ["energy", "dist_a0"]

    def __len__(self) -> int:
        return int(self.sweeps.size)

    def rows(self) -> Iterator[Tuple]:
        for s, m, e, dist in zip(self.sweeps, self.fractions, self.energies, self.dist_a0):
            yield (int(s), *(float(v) for v in m), float(e), float(dist))


def simulate(
    params: ModelParams,
    sweeps: int,
    stride: int,
    seed: int,
    d: float = 1.0,
    record: str = "m0",
    rule: str = "tempered",
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Run the sampler from the balanced class and record the target coordinate every `stride` sweeps.

    `rng` replaces the stream derived from `seed` alone.
    """
    if sweeps < 0 or stride < 1:
        raise ModelError(f"need sweeps >= 0 and stride >= 1, got {sweeps}, {stride}")
    system = ReplicaSystem.create(params.N, params.beta, d=d, q=params.q, record=record, rule=rule, seed=seed)
    rng = make_rng(seed) if rng is None else rng
    lattice = system.lattice
    dist = lattice.l1_distance(np.full(params.q, 1.0 / params.q))
    n_records = sweeps // stride + 1
    idx = np.empty(n_records, dtype=np.int64)
    idx[0] = system.indices[-1]
    for s in range(1, n_records * stride - stride + 1):
        r_sweep(system, rng)
        if s % stride == 0:
            idx[s // stride] = system.indices[-1]
    return Trajectory(
        q=params.q,
        stride=stride,
        sweeps=np.arange(n_records, dtype=np.int64) * stride,
        fractions=lattice.fractions[idx],
        energies=lattice.energies[idx],
        dist_a0=dist[idx],
    )


def metropolis_chain(
    lattice: SimplexLattice, beta: float, steps: int, rng: np.random.Generator, start: Optional[int] = None
) -> np.ndarray:
    """||m - a0||_1 along a plain lumped Metropolis chain, one entry per step (start included)."""
    dist = lattice.l1_distance(np.full(lattice.q, 1.0 / lattice.q))
    index = lattice.balanced_index if start is None else start
    out = np.empty(steps + 1)
    out[0] = dist[index]
    for t in range(1, steps + 1):
        index = _lumped_index_step(lattice, index, beta, rng)
        out[t] = dist[index]
    return out


def integrated_autocorrelation_time(x: Sequence[float], c: float = 5.0) -> float:
    """tau = 1 + 2 sum_t rho(t), summed up to the first window W >= c * tau(W)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise FitError("need at least two samples")
    y = x - x.mean()
    if not np.any(y):
        raise FitError("series is constant; autocorrelation is undefined")
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, n=size)
    acf = np.fft.irfft(f * np.conjugate(f), n=size)[:n]
    rho = acf / acf[0]
    taus = 2.0 * np.cumsum(rho) - 1.0
    window = np.arange(n) < c * taus
    cut = int(np.argmin(window)) if not window.all() else n - 1
    return float(taus[cut])
