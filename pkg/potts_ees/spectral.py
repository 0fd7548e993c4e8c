"""Conductance, spectral gaps and bad-cut ratios for lumped kernels."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.special import logsumexp
from scipy.stats import linregress, t as student_t

from .bands import EnergyBands
from .errors import (
    BallTooSmallError,
    EigenSolverError,
    FitError,
    ModelError,
    NonReversibleKernelError,
    PremiseError,
)
from .kernels import LumpedDistribution, LumpedKernel, ee_jump_kernel, metropolis_kernel
from .lattice import SimplexLattice
from .model import find_local_maxima

logger = logging.getLogger(__name__)

DENSE_LIMIT = 5000
REVERSIBILITY_TOL = 1e-12
BALL_SLACK = 1e-12
EXACT_LIMIT = 21


# --- Cuts ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SetConductance:
    phi: float
    mass: float
    flow: float
    exceeds_half: bool

    def __float__(self) -> float:
        return self.phi


def _flow_matrix(kernel: LumpedKernel, pi: LumpedDistribution) -> sparse.csr_matrix:
    return (sparse.diags(pi.probabilities) @ kernel.matrix).tocsr()


def conductance_of_set(
    kernel: LumpedKernel, pi: LumpedDistribution, S: Union[Iterable[int], np.ndarray]
) -> SetConductance:
    """Boundary flow out of S divided by pi(S); flagged when pi(S) > 1/2.

    S is either a collection of class indices or a boolean mask over the classes.
    """
    arr = np.asarray(S if isinstance(S, np.ndarray) else list(S))
    if arr.dtype == bool:
        if arr.shape != (kernel.size,):
            raise ModelError(f"mask must have shape ({kernel.size},), got {arr.shape}")
        mask = arr.copy()
    else:
        mask = np.zeros(kernel.size, dtype=bool)
        mask[arr.astype(np.int64)] = True
    if not mask.any():
        raise ModelError("conductance needs a nonempty set")
    mass = pi.mass(mask)
    if mass <= 0:
        raise ModelError("set has zero stationary mass")
    sub = kernel.matrix[mask][:, ~mask]
    flow = float(pi.probabilities[mask] @ np.asarray(sub.sum(axis=1)).ravel())
    exceeds = mass > 0.5
    if exceeds:
        logger.warning("set mass %.6g exceeds 1/2; it is outside the conductance minimum", mass)
    return SetConductance(phi=flow / mass, mass=mass, flow=flow, exceeds_half=exceeds)


@dataclass
class CutFamily:
    """Nested sets S_1 ⊂ S_2 ⊂ ... given by a class ordering; ties in `keys` enter together."""

    name: str
    order: np.ndarray
    keys: np.ndarray
    center: Optional[Tuple[float, ...]] = None

    @classmethod
    def ball(cls, lattice: SimplexLattice, center: Sequence[float], name: str = "ball") -> "CutFamily":
        dist = lattice.l1_distance(center)
        # round away float noise so classes at equal distance share a ball
        keys = np.round(dist, 12)
        order = np.argsort(keys, kind="stable")
        return cls(name, order, keys[order], tuple(float(c) for c in center))

    @classmethod
    def level_sets(cls, pi: LumpedDistribution, descending: bool = True) -> "CutFamily":
        lp = pi.log_probabilities
        keys = -lp if descending else lp
        order = np.argsort(keys, kind="stable")
        return cls("pi-superlevel" if descending else "pi-sublevel", order, keys[order])

    def groups(self) -> np.ndarray:
        """Group id (0, 1, ...) per position of `order`."""
        return np.concatenate([[0], np.cumsum(np.diff(self.keys) != 0)]).astype(np.int64)

    def radii(self) -> np.ndarray:
        g = self.groups()
        return self.keys[np.r_[np.flatnonzero(np.diff(g)), g.size - 1]]


@dataclass(frozen=True)
class FamilyCut:
    family: str
    radius: float
    phi: float
    mass: float
    flow: float
    size: int


def family_cuts(kernel: LumpedKernel, pi: LumpedDistribution, family: CutFamily) -> List[FamilyCut]:
    """Conductance of every proper prefix set; sets above mass 1/2 are scored by their complement."""
    flow = _flow_matrix(kernel, pi).tocoo()
    group_of_class = np.empty(kernel.size, dtype=np.int64)
    group_of_class[family.order] = family.groups()
    n_groups = int(group_of_class.max()) + 1
    gx, gy = group_of_class[flow.row], group_of_class[flow.col]
    fwd = gx < gy
    diff = np.zeros(n_groups + 1)
    np.add.at(diff, gx[fwd], flow.data[fwd])
    np.add.at(diff, gy[fwd], -flow.data[fwd])
    boundary = np.cumsum(diff)[:n_groups]

    lp = pi.log_probabilities
    group_lp = np.full(n_groups, -np.inf)
    np.logaddexp.at(group_lp, group_of_class, lp)
    inside = np.exp(np.logaddexp.accumulate(group_lp))
    outside_lp = np.logaddexp.accumulate(group_lp[::-1])[::-1]
    outside = np.r_[np.exp(outside_lp[1:]), 0.0]
    sizes = np.cumsum(np.bincount(group_of_class, minlength=n_groups))
    radii = family.radii()

    cuts = []
    for g in range(n_groups - 1):
        mass = min(inside[g], outside[g])
        if mass <= 0:
            continue
        cuts.append(FamilyCut(family.name, float(radii[g]), boundary[g] / mass, float(mass), float(boundary[g]), int(sizes[g])))
    return cuts


def standard_families(lattice: SimplexLattice, pi: LumpedDistribution, beta: float) -> List[CutFamily]:
    """Balls around the balanced point and the ordered maxima (vertices when none), plus pi level sets."""
    q = lattice.q
    families = [CutFamily.ball(lattice, np.full(q, 1.0 / q), "ball-a0")]
    report = find_local_maxima(beta, q, grid=None)
    centers = [m.point.as_array() for m in report.maxima if m.classification == "asymmetric"]
    if not centers:
        centers = list(np.eye(q))
    for i, c in enumerate(centers):
        families.append(CutFamily.ball(lattice, c, f"ball-max{i}"))
    families.append(CutFamily.level_sets(pi, descending=True))
    families.append(CutFamily.level_sets(pi, descending=False))
    return families


def family_conductance(
    kernel: LumpedKernel, pi: LumpedDistribution, families: Sequence[CutFamily]
) -> Tuple[float, FamilyCut]:
    """Smallest conductance over all prefix sets of the families (an upper bound on the true minimum)."""
    best: Optional[FamilyCut] = None
    for fam in families:
        for cut in family_cuts(kernel, pi, fam):
            if best is None or cut.phi < best.phi:
                best = cut
    if best is None:
        raise ModelError("no proper cut in the given families")
    return best.phi, best


def exact_conductance(kernel: LumpedKernel, pi: LumpedDistribution, limit: int = EXACT_LIMIT) -> Tuple[float, np.ndarray]:
    """Minimum over every nonempty proper subset, scored on its smaller side."""
    L = kernel.size
    if L > limit:
        raise ModelError(f"exhaustive conductance over 2^{L} subsets exceeds the limit 2^{limit}")
    F = _flow_matrix(kernel, pi).toarray()
    p = pi.probabilities
    bits = 1 << np.arange(L)
    best_phi, best_code = math.inf, 0
    total = 1 << L
    chunk = 1 << 16
    for start in range(1, total - 1, chunk):
        codes = np.arange(start, min(start + chunk, total - 1), dtype=np.int64)
        masks = (codes[:, None] & bits[None, :]) != 0
        m = masks.astype(float)
        flow = np.einsum("sx,xy,sy->s", m, F, 1.0 - m)
        inside = m @ p
        mass = np.minimum(inside, 1.0 - inside)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(mass > 0, flow / mass, np.inf)
        i = int(np.argmin(phi))
        if phi[i] < best_phi:
            best_phi, best_code = float(phi[i]), int(codes[i])
    members = np.flatnonzero((best_code & bits) != 0)
    return best_phi, members


# --- Spectra ------------------------------------------------------------------------
def _symmetrized(kernel: LumpedKernel, pi: LumpedDistribution) -> sparse.csr_matrix:
    coo = kernel.matrix.tocoo()
    lp = pi.log_probabilities
    data = coo.data * np.exp(0.5 * (lp[coo.row] - lp[coo.col]))
    A = sparse.csr_matrix((data, (coo.row, coo.col)), shape=kernel.matrix.shape)
    return ((A + A.T) * 0.5).tocsr()


def _power_gap(A: sparse.csr_matrix, u: np.ndarray, tol: float, max_iter: int, seed: int = 0) -> float:
    """Second eigenvalue of A via power iteration on (I + A)/2 deflated by u."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(u.size)
    v -= (u @ v) * u
    v /= np.linalg.norm(v)
    for it in range(1, max_iter + 1):
        w = 0.5 * (v + A @ v)
        w -= (u @ w) * u
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) < tol:
            logger.debug("power iteration converged after %d iterations", it)
            return 2.0 * lam - 1.0
        norm = np.linalg.norm(w)
        if norm == 0:
            return -1.0
        v = w / norm
    raise EigenSolverError(f"power iteration did not converge in {max_iter} iterations")


def spectral_gap(
    kernel: LumpedKernel,
    pi: LumpedDistribution,
    dense_limit: int = DENSE_LIMIT,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
) -> float:
    """1 - lambda_2 of the pi-symmetrized kernel; the kernel must be reversible w.r.t. pi."""
    err = kernel.detailed_balance_error(pi)
    if err > REVERSIBILITY_TOL:
        raise NonReversibleKernelError(
            f"{kernel.kind} kernel violates detailed balance by {err:.3e}"
        )
    A = _symmetrized(kernel, pi)
    if kernel.size <= dense_limit:
        try:
            vals = eigh(A.toarray(), eigvals_only=True)
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(str(exc)) from exc
        if vals[0] < -1e-9:
            logger.warning("%s kernel has negative eigenvalue %.3e", kernel.kind, vals[0])
        return float(1.0 - vals[-2]) if vals.size > 1 else 1.0
    logger.info(
        "lattice has %d classes (> %d); switching to deflated power iteration", kernel.size, dense_limit
    )
    u = np.exp(0.5 * pi.log_probabilities)
    u /= np.linalg.norm(u)
    return float(1.0 - _power_gap(A, u, tol, max_iter))


def relaxation_time(gap: float) -> float:
    return math.inf if gap <= 0 else 1.0 / gap


@dataclass(frozen=True)
class CheegerCheck:
    gap: float
    phi_family: float
    phi_exact: Optional[float]
    upper_ok: bool
    lower_ok: Optional[bool]
    cut: FamilyCut

    @property
    def ok(self) -> bool:
        return self.upper_ok and self.lower_ok is not False


def cheeger_check(
    kernel: LumpedKernel,
    pi: LumpedDistribution,
    families: Sequence[CutFamily],
    gap: Optional[float] = None,
    exact_limit: int = EXACT_LIMIT,
    tol: float = 1e-12,
) -> CheegerCheck:
    """Gamma <= 2 Phi_family always; Phi^2/2 <= Gamma where the true minimum is known."""
    gap = spectral_gap(kernel, pi) if gap is None else gap
    phi_family, cut = family_conductance(kernel, pi, families)
    upper_ok = gap <= 2.0 * phi_family + tol
    phi_exact = None
    lower_ok: Optional[bool] = None
    if kernel.size <= exact_limit:
        phi_exact, _ = exact_conductance(kernel, pi, exact_limit)
        lower_ok = phi_exact ** 2 / 2.0 <= gap + tol and gap <= 2.0 * phi_exact + tol
        if abs(phi_exact - phi_family) <= 1e-12 * max(1.0, phi_exact):
            lower_ok = lower_ok and phi_family ** 2 / 2.0 <= gap + tol
    return CheegerCheck(gap, phi_family, phi_exact, upper_ok, lower_ok, cut)


# --- Bad cuts -----------------------------------------------------------------------
def _ball(pi: LumpedDistribution, center: Sequence[float], radius: float) -> np.ndarray:
    return pi.lattice.l1_distance(center) <= radius + BALL_SLACK


def ball_cut_ratio(pi: LumpedDistribution, center: Sequence[float], epsilon: float, delta: float) -> float:
    """pi(B_eps minus B_delta) / pi(B_eps) for closed 1-norm balls."""
    if not 0 < delta < epsilon:
        raise ModelError(f"need 0 < delta < epsilon, got delta={delta}, epsilon={epsilon}")
    inner = _ball(pi, center, delta)
    if not inner.any():
        raise BallTooSmallError(
            f"no class within {delta} of the center at N={pi.lattice.N}; increase N or delta"
        )
    outer = _ball(pi, center, epsilon)
    annulus = outer & ~inner
    if not annulus.any():
        return 0.0
    lp = pi.log_probabilities
    return float(np.exp(logsumexp(lp[annulus]) - logsumexp(lp[outer])))


def _support(kernel: LumpedKernel) -> sparse.csr_matrix:
    m = kernel.matrix.copy()
    m.data = (m.data > 0).astype(float)
    m.eliminate_zeros()
    return m.tocsr()


def jump_move_jump_reach(
    lattice: SimplexLattice, start: np.ndarray, jump: LumpedKernel, move: LumpedKernel
) -> np.ndarray:
    """Classes reachable from `start` by a jump, a Metropolis move, then a jump."""
    v = sparse.csr_matrix(start.astype(float).reshape(1, -1))
    for step in (_support(jump), _support(move), _support(jump)):
        v = v @ step
        v.data = np.ones_like(v.data)
    reach = np.zeros(lattice.size, dtype=bool)
    reach[v.indices] = True
    return reach


@dataclass(frozen=True)
class LiftedCutBound:
    bound: float
    premise_ok: bool
    max_reach_distance: float
    epsilon: float
    delta: float


def lifted_cut_conductance_bound(
    pi_top: LumpedDistribution,
    epsilon: float,
    delta: float,
    d: float = 1.0,
    center: Optional[Sequence[float]] = None,
) -> LiftedCutBound:
    """Cut bound for the joint chain: the top-level ball ratio, once the sweep cannot jump the annulus.

    The cut constrains only the top coordinate and the stationary law is a product, so the
    bound is the ball ratio at the top temperature. The premise is checked on the exact
    supports of the full-record jump and Metropolis kernels.
    """
    lattice = pi_top.lattice
    q = lattice.q
    beta = pi_top.beta if pi_top.beta is not None else 0.0
    center = np.full(q, 1.0 / q) if center is None else np.asarray(center, dtype=float)
    bands = EnergyBands.from_density(lattice.N, d, q)
    # the full-record jump support is the same-band relation for every beta_hi > beta_lo
    beta_hi = beta if beta > 0 else 1.0
    jump = ee_jump_kernel(lattice, bands, beta_hi, beta_hi * (bands.M - 1) / bands.M)
    move = metropolis_kernel(lattice, beta)
    start = _ball(pi_top, center, delta)
    if not start.any():
        raise BallTooSmallError(f"no class within {delta} of the center at N={lattice.N}")
    reach = jump_move_jump_reach(lattice, start, jump, move)
    max_dist = float(lattice.l1_distance(center)[reach].max())
    if max_dist > epsilon + BALL_SLACK:
        raise PremiseError(
            f"a jump-move-jump path leaves B_{epsilon} from B_{delta} at N={lattice.N}, d={d} "
            f"(reaches distance {max_dist:.4f}); use a larger N"
        )
    bound = ball_cut_ratio(pi_top, center, epsilon, delta)
    return LiftedCutBound(bound, True, max_dist, epsilon, delta)


# --- Fits ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ExponentialFit:
    rate: float
    intercept: float
    r_squared: float
    stderr: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return {
            "rate": self.rate, "intercept": self.intercept, "r_squared": self.r_squared,
            "stderr": self.stderr, "ci_low": self.ci_low, "ci_high": self.ci_high,
        }


def fit_exponential_rate(ns: Sequence[float], values: Sequence[float], level: float = 0.95) -> ExponentialFit:
    """Least squares fit of log(value) = intercept - rate * N."""
    x = np.asarray(ns, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size != y.size or x.size < 4:
        raise FitError(f"need at least 4 (N, value) pairs, got {x.size}")
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise FitError("values must be finite and positive")
    logs = np.log(y)
    res = linregress(x, logs)
    fitted = res.intercept + res.slope * x
    ss_res = float(((logs - fitted) ** 2).sum())
    ss_tot = float(((logs - logs.mean()) ** 2).sum())
    if ss_tot <= 1e-24:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    half = student_t.ppf(0.5 + level / 2.0, x.size - 2) * res.stderr
    rate = -res.slope
    return ExponentialFit(rate, res.intercept, r2, res.stderr, rate - half, rate + half)


@dataclass
class ConductanceReport:
    """Per (N, beta, r) cut rows plus the fitted decay rates."""

    rows: List[dict] = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def add(self, N: int, beta: float, r: float, phi: float, pi_S: float, gap: Optional[float]) -> None:
        self.rows.append({"N": N, "beta": beta, "r": r, "phi": phi, "pi_S": pi_S, "gap": gap})

    def sorted_rows(self) -> List[dict]:
        return sorted(self.rows, key=lambda r: (r["N"], r["beta"], r["r"]))

    def to_dict(self) -> dict:
        return {"rows": self.sorted_rows(), "fits": {k: v.to_dict() for k, v in self.fits.items()}}
