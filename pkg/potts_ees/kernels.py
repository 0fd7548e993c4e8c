"""Exact lumped kernels and distributions on the simplex lattice.

H and every proposal/acceptance probability depend on a configuration only through its
color counts, so Metropolis and the equi-energy jump project exactly onto classes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .bands import BandRecord, EnergyBands
from .errors import InvariantError, ModelError
from .lattice import SimplexLattice

logger = logging.getLogger(__name__)

ROW_TOL = 1e-12
JUMP_RULES = ("tempered", "uniform")


# --- Distributions ----------------------------------------------------------------
@dataclass(eq=False)
class LumpedDistribution:
    lattice: Optional[SimplexLattice]
    log_weights: np.ndarray
    log_normalizer: float
    beta: Optional[float] = None

    @classmethod
    def from_probabilities(cls, probs: Sequence[float], lattice: Optional[SimplexLattice] = None) -> "LumpedDistribution":
        p = np.asarray(probs, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.log(p)
        return cls(lattice, lw, float(logsumexp(lw)))

    @property
    def size(self) -> int:
        return int(self.log_weights.size)

    @property
    def log_probabilities(self) -> np.ndarray:
        return self.log_weights - self.log_normalizer

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probabilities)

    def mass(self, indices) -> float:
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        if idx.size == 0:
            return 0.0
        return float(np.exp(logsumexp(self.log_probabilities[idx])))

    def total_variation(self, other) -> float:
        q = other.probabilities if isinstance(other, LumpedDistribution) else np.asarray(other, dtype=float)
        return 0.5 * float(np.abs(self.probabilities - q).sum())

    def to_rows(self) -> Iterator[Tuple]:
        """(n_1, ..., n_q, log_weight) per class, lattice order."""
        if self.lattice is None:
            for i, lw in enumerate(self.log_weights):
                yield (i, float(lw))
            return
        for counts, lw in zip(self.lattice.counts.tolist(), self.log_weights):
            yield (*counts, float(lw))


def stationary_distribution(lattice: SimplexLattice, beta: float) -> LumpedDistribution:
    """log_weights = log multinomial + beta * H, normalized by log-sum-exp."""
    lw = lattice.log_sizes + beta * lattice.energies
    return LumpedDistribution(lattice, lw, float(logsumexp(lw)), beta)


# --- Kernels ------------------------------------------------------------------------
@dataclass(eq=False)
class LumpedKernel:
    lattice: Optional[SimplexLattice]
    matrix: sparse.csr_matrix
    kind: str
    beta: Optional[float] = None
    beta_hi: Optional[float] = None
    beta_lo: Optional[float] = None
    reversible_beta: Optional[float] = None
    rule: Optional[str] = None

    @classmethod
    def from_dense(cls, matrix, kind: str = "dense", lattice: Optional[SimplexLattice] = None) -> "LumpedKernel":
        return cls(lattice, sparse.csr_matrix(np.asarray(matrix, dtype=float)), kind)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def row(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        start, stop = self.matrix.indptr[index], self.matrix.indptr[index + 1]
        return self.matrix.indices[start:stop], self.matrix.data[start:stop]

    def dense_row(self, index: int) -> np.ndarray:
        return np.asarray(self.matrix.getrow(index).todense()).ravel()

    def row_sum_error(self) -> float:
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        return float(np.abs(sums - 1.0).max())

    def check(self, tol: float = ROW_TOL) -> None:
        """Row-stochasticity and probabilities within [0, 1]."""
        data = self.matrix.data
        if data.size and (data.min() < -tol or data.max() > 1.0 + tol):
            raise InvariantError("row_stochasticity", f"{self.kind} kernel has entries outside [0, 1]")
        err = self.row_sum_error()
        if err > tol:
            raise InvariantError("row_stochasticity", f"{self.kind} kernel row sums off by {err:.3e}")

    def detailed_balance_error(self, pi: "LumpedDistribution") -> float:
        """max |pi(x) P(x, y) - pi(y) P(y, x)| over stored entries."""
        flow = sparse.diags(pi.probabilities) @ self.matrix
        diff = (flow - flow.T).tocsr()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def is_reversible(self, pi: "LumpedDistribution", tol: float = ROW_TOL) -> bool:
        return self.detailed_balance_error(pi) <= tol

    def to_rows(self) -> Iterator[Tuple[int, int, float]]:
        """(row_index, col_index, probability), sorted by row then column."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            yield int(r), int(c), float(v)


def _assemble(lattice: SimplexLattice, rows: List[np.ndarray], cols: List[np.ndarray], vals: List[np.ndarray]) -> sparse.csr_matrix:
    r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vals) if vals else np.zeros(0)
    off = r != c
    r, c, v = r[off], c[off], v[off]
    hold = 1.0 - np.bincount(r, weights=v, minlength=lattice.size)
    diag = np.arange(lattice.size)
    matrix = sparse.csr_matrix(
        (np.concatenate([v, hold]), (np.concatenate([r, diag]), np.concatenate([c, diag]))),
        shape=(lattice.size, lattice.size),
    )
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def metropolis_kernel(lattice: SimplexLattice, beta: float) -> LumpedKernel:
    """Lumped Metropolis: pair (c, c') proposed with n_c / (2N(q-1)), accepted with min(1, e^{beta dH})."""
    N, q = lattice.N, lattice.q
    nbr = lattice.neighbors
    rows, cols, vals = [], [], []
    for src in range(q):
        for dst in range(q):
            if src == dst:
                continue
            target = nbr[:, src, dst]
            ok = target >= 0
            n_src = lattice.counts[ok, src]
            n_dst = lattice.counts[ok, dst]
            delta_h = (n_dst - n_src + 1) / N
            prob = n_src / (2.0 * N * (q - 1)) * np.exp(np.minimum(0.0, beta * delta_h))
            rows.append(np.flatnonzero(ok))
            cols.append(target[ok])
            vals.append(prob)
    matrix = _assemble(lattice, rows, cols, vals)
    return LumpedKernel(lattice, matrix, "metropolis", beta=beta, reversible_beta=beta)


def jump_proposal_log_weights(lattice: SimplexLattice, beta_lo: float, rule: str) -> np.ndarray:
    """Unnormalized log proposal weight of each class inside its band."""
    if rule == "uniform":
        return lattice.log_sizes
    if rule == "tempered":
        return lattice.log_sizes + beta_lo * lattice.energies
    raise ModelError(f"unknown jump rule {rule!r}; expected one of {JUMP_RULES}")


def ee_jump_kernel(
    lattice: SimplexLattice,
    bands: EnergyBands,
    beta_hi: float,
    beta_lo: float,
    record: Optional[BandRecord] = None,
    level: Optional[int] = None,
    rule: str = "tempered",
) -> LumpedKernel:
    """Lumped equi-energy jump from the chain at beta_hi into the record of the level at beta_lo.

    The target is drawn among the recorded classes of the current band (the current class
    included), then accepted with min(1, exp((beta_hi - beta_lo)(H' - H))). Under "uniform"
    the draw is uniform over recorded configurations; under "tempered" it follows the
    beta_lo Gibbs law restricted to the band. A band with no recorded class keeps the
    chain in place. `record=None` means the full record.

    "uniform" is the literal record-uniform proposal; with a full record it is reversible
    with respect to the Gibbs law at beta_hi - beta_lo, not beta_hi. The default
    "tempered" reweights the draw by exp(beta_lo * H) so that the full-record kernel is
    reversible at beta_hi and the replica product law is preserved. Pass rule="uniform"
    for the literal proposal; `reversible_beta` reports which temperature applies.
    """
    if not beta_hi > beta_lo >= 0:
        raise ModelError(f"need beta_hi > beta_lo >= 0, got {beta_hi}, {beta_lo}")
    if record is not None and level is None:
        raise ModelError("a record needs the level whose cells are read")
    log_w = jump_proposal_log_weights(lattice, beta_lo, rule)
    energies = lattice.energies
    class_band = bands.bands_of(lattice)
    present = np.ones(lattice.size, dtype=bool) if record is None else record.present[level]
    dbeta = beta_hi - beta_lo

    rows, cols, vals = [], [], []
    for k in range(1, bands.M + 1):
        in_band = np.flatnonzero(class_band == k)
        targets = in_band[present[in_band]]
        if in_band.size == 0 or targets.size == 0:
            continue
        proposal = np.exp(log_w[targets] - logsumexp(log_w[targets]))
        dh = energies[targets][None, :] - energies[in_band][:, None]
        prob = proposal[None, :] * np.exp(np.minimum(0.0, dbeta * dh))
        rows.append(np.repeat(in_band, targets.size))
        cols.append(np.tile(targets, in_band.size))
        vals.append(prob.ravel())
    matrix = _assemble(lattice, rows, cols, vals)

    complete = bool(present.all())
    if complete:
        reversible = beta_hi if rule == "tempered" else dbeta
    else:
        reversible = None
    return LumpedKernel(
        lattice, matrix, "ee-jump", beta_hi=beta_hi, beta_lo=beta_lo,
        reversible_beta=reversible, rule=rule,
    )


def identity_kernel(lattice: SimplexLattice) -> LumpedKernel:
    return LumpedKernel(lattice, sparse.identity(lattice.size, format="csr"), "identity")


def band_locality_violation(kernel: LumpedKernel, bands: EnergyBands) -> float:
    """Largest excess of | ||m||^2 - ||m'||^2 | over (q-1)/(qM) on the kernel's support."""
    lattice = kernel.lattice
    coo = kernel.matrix.tocoo()
    sq = lattice.sq_norm()
    gap = np.abs(sq[coo.row] - sq[coo.col])
    if gap.size == 0:
        return 0.0
    return float(max(0.0, (gap - bands.sq_norm_width).max()))


@dataclass(frozen=True)
class BalancedProfile:
    index: int
    counts: Tuple[int, ...]
    strict_max: bool
    strict_min: bool
    # log pi(neighbor) - log pi(balanced), smallest and largest over lattice neighbors
    min_delta: float
    max_delta: float


def balanced_class_profile(pi: LumpedDistribution) -> BalancedProfile:
    """Whether the balanced class is a strict local extremum of the lumped log-weights."""
    lattice = pi.lattice
    b = lattice.balanced_index
    nbr = lattice.neighbors[b].ravel()
    nbr = np.unique(nbr[nbr >= 0])
    nbr = nbr[nbr != b]
    delta = pi.log_weights[nbr] - pi.log_weights[b]
    return BalancedProfile(
        index=b,
        counts=tuple(lattice.counts[b].tolist()),
        strict_max=bool(np.all(delta < 0)),
        strict_min=bool(np.all(delta > 0)),
        min_delta=float(delta.min()),
        max_delta=float(delta.max()),
    )
