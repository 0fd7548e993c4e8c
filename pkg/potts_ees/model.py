"""Mean-field Potts model: states, energy, Gibbs log-weights and the free-energy landscape.

Conventions
    H(sigma) = (1 / 2N) * sum_c n_c^2, the Gibbs weight is exp(+beta * H) and
    f(c) = sum_i (beta / 2 * c_i^2 - c_i log c_i) with 0 log 0 = 0.

All weights stay in log-space; beta * H grows linearly in N.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq, minimize
from scipy.special import xlogy

from .errors import MaximaSearchError, ModelError

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12
HESSIAN_TOL = 1e-9
GRADIENT_TOL = 1e-10
DEFAULT_GRID = 200

ArrayLike = Union[Sequence[float], np.ndarray]


# --- States -------------------------------------------------------------------
@dataclass(frozen=True)
class ModelParams:
    N: int
    q: int = 3
    beta: float = 0.0

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ModelError(f"N must be a positive integer, got {self.N!r}")
        if int(self.q) != self.q or self.q < 2:
            raise ModelError(f"q must be an integer >= 2, got {self.q!r}")
        if not math.isfinite(self.beta) or self.beta < 0:
            raise ModelError(f"beta must be finite and >= 0, got {self.beta!r}")


@dataclass(frozen=True)
class SpinConfiguration:
    """N colors in {1..q}."""

    colors: Tuple[int, ...]
    q: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "colors", tuple(int(c) for c in self.colors))
        if not self.colors:
            raise ModelError("a configuration needs at least one spin")
        if self.q < 2:
            raise ModelError(f"q must be >= 2, got {self.q}")
        bad = [c for c in self.colors if c < 1 or c > self.q]
        if bad:
            raise ModelError(f"colors must lie in 1..{self.q}, got {bad[:5]}")

    @property
    def N(self) -> int:
        return len(self.colors)

    def recolor(self, site: int, color: int) -> "SpinConfiguration":
        colors = list(self.colors)
        colors[site] = color
        return SpinConfiguration(tuple(colors), self.q)


@dataclass(frozen=True)
class ColorCount:
    """Occupation vector (n_1, ..., n_q); the lumped state."""

    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) < 2:
            raise ModelError(f"need at least two colors, got {self.counts}")
        if any(c < 0 for c in self.counts):
            raise ModelError(f"counts must be nonnegative, got {self.counts}")
        if sum(self.counts) < 1:
            raise ModelError("counts must sum to N >= 1")

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def q(self) -> int:
        return len(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    def fractions(self) -> np.ndarray:
        return self.as_array() / self.N

    def move(self, src: int, dst: int) -> "ColorCount":
        """One spin of color index `src` recolored to `dst` (0-based)."""
        counts = list(self.counts)
        counts[src] -= 1
        counts[dst] += 1
        return ColorCount(tuple(counts))


@dataclass(frozen=True)
class SimplexPoint:
    coords: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        arr = np.asarray(self.coords)
        if np.any(arr < -SIMPLEX_TOL):
            raise ModelError(f"simplex coordinates must be nonnegative, got {self.coords}")
        if abs(arr.sum() - 1.0) > SIMPLEX_TOL:
            raise ModelError(f"simplex coordinates must sum to 1, got {arr.sum()!r}")

    @property
    def q(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)

    @classmethod
    def balanced(cls, q: int = 3) -> "SimplexPoint":
        return cls(tuple([1.0 / q] * q))


def random_configuration(N: int, q: int, rng: np.random.Generator) -> SpinConfiguration:
    return SpinConfiguration(tuple(rng.integers(1, q + 1, size=N).tolist()), q)


# --- Energy -----------------------------------------------------------------------
def magnetization(sigma: SpinConfiguration) -> ColorCount:
    colors = np.asarray(sigma.colors, dtype=np.int64) - 1
    return ColorCount(tuple(np.bincount(colors, minlength=sigma.q).tolist()))


def hamiltonian(n: ColorCount) -> float:
    return sum(c * c for c in n.counts) / (2 * n.N)


def log_gibbs_weight(n: ColorCount, beta: float) -> float:
    return beta * hamiltonian(n)


def energy_bounds(N: int, q: int = 3) -> Tuple[float, float]:
    """Smallest and largest possible energy: N/(2q) (balanced) and N/2 (monochrome)."""
    return N / (2 * q), N / 2


# --- Free energy ------------------------------------------------------------------
def _coords(c: Union[SimplexPoint, ArrayLike]) -> np.ndarray:
    if isinstance(c, SimplexPoint):
        return c.as_array()
    return np.asarray(c, dtype=float)


def free_energy_f(c: Union[SimplexPoint, ArrayLike], beta: float) -> Union[float, np.ndarray]:
    """f(c) = sum_i (beta/2 c_i^2 - c_i log c_i); vectorized over leading axes."""
    x = _coords(c)
    val = np.sum(0.5 * beta * x * x - xlogy(x, x), axis=-1)
    return float(val) if np.ndim(val) == 0 else val


def free_energy_gradient(c: Union[SimplexPoint, ArrayLike], beta: float) -> np.ndarray:
    """Gradient of f projected onto the tangent space of the simplex (interior points)."""
    x = _coords(c)
    g = beta * x - np.log(x) - 1.0
    return g - g.mean()


def _tangent_basis(q: int) -> np.ndarray:
    return null_space(np.ones((1, q)))


def reduced_hessian(c: Union[SimplexPoint, ArrayLike], beta: float) -> np.ndarray:
    """(q-1) x (q-1) Hessian of f in an orthonormal basis of the simplex tangent space."""
    x = _coords(c)
    basis = _tangent_basis(x.size)
    return basis.T @ np.diag(beta - 1.0 / x) @ basis


def directional_second_derivative(a: float, beta: float) -> float:
    """h''(0) for h(t) = f(1/3 + t, 1/3 - a t, 1/3 - (1 - a) t), q = 3.

    The direction v = (1, -a, -(1 - a)) has |v|^2 = 2 (a^2 - a + 1) and the Hessian of f at
    the balanced point is (beta - 3) I, so h''(0) = -(6 - 2 beta)(a^2 - a + 1).
    """
    if not 0.0 <= a <= 1.0:
        raise ModelError(f"a must lie in [0, 1], got {a}")
    return -(6.0 - 2.0 * beta) * (a * a - a + 1.0)


# --- Critical structure -----------------------------------------------------------
def critical_beta(q: int = 3) -> float:
    """Inverse temperature at which the balanced and ordered maxima of f tie."""
    if q < 2:
        raise ModelError(f"q must be >= 2, got {q}")
    if q == 2:
        return 2.0
    if q == 3:
        return 4.0 * math.log(2.0)
    return 2.0 * (q - 1) * math.log(q - 1) / (q - 2)


def _family_point(alpha_major: float, q: int) -> np.ndarray:
    alpha = (1.0 - alpha_major) / (q - 1)
    return np.array([alpha_major] + [alpha] * (q - 1))


def _family_slope(alpha_major: np.ndarray, beta: float, q: int) -> np.ndarray:
    """d f / d alpha' along (alpha', alpha, ..., alpha); zero iff beta a' - log a' = beta a - log a."""
    alpha = (1.0 - alpha_major) / (q - 1)
    return beta * (alpha_major - alpha) - np.log(alpha_major / alpha)


def _family_roots(beta: float, q: int) -> List[Tuple[float, bool]]:
    """Nontrivial stationary points of f on the one-parameter family.

    Returns (alpha', rising_to_falling) pairs; rising_to_falling marks a maximum along the family.
    """
    center = 1.0 / q
    eps = 1e-12
    grid = np.linspace(eps, 1.0 - eps, 20001)
    near = center + np.concatenate([-np.logspace(-1, -9, 400), np.logspace(-9, -1, 400)])
    grid = np.unique(np.concatenate([grid, near]))
    grid = grid[np.abs(grid - center) > 5e-10]
    slope = _family_slope(grid, beta, q)
    roots: List[Tuple[float, bool]] = []
    for i in range(grid.size - 1):
        lo, hi = grid[i], grid[i + 1]
        if (lo < center) != (hi < center):
            continue
        s_lo, s_hi = slope[i], slope[i + 1]
        if s_lo == 0.0:
            roots.append((float(lo), s_hi < 0))
            continue
        if s_lo * s_hi >= 0:
            continue
        root, info = brentq(
            _family_slope, lo, hi, args=(beta, q), xtol=1e-15, maxiter=200, full_output=True,
            disp=False,
        )
        if not info.converged:
            raise MaximaSearchError(
                f"root finding on [{lo:.6g}, {hi:.6g}] did not converge at beta={beta} ({info.flag})"
            )
        roots.append((float(root), bool(s_lo > 0)))
    return roots


def _newton_polish(x: np.ndarray, beta: float, steps: int = 8) -> np.ndarray:
    basis = _tangent_basis(x.size)
    for _ in range(steps):
        grad = free_energy_gradient(x, beta)
        if np.linalg.norm(grad) < 1e-14:
            break
        hess = reduced_hessian(x, beta)
        try:
            delta = np.linalg.solve(hess, basis.T @ grad)
        except np.linalg.LinAlgError:
            break
        trial = x - basis @ delta
        if np.any(trial <= 0):
            break
        x = trial / trial.sum()
    return x


def _is_local_max(x: np.ndarray, beta: float) -> bool:
    return bool(np.all(np.linalg.eigvalsh(reduced_hessian(x, beta)) < -HESSIAN_TOL))


def asymmetric_tie_gap(beta: float, q: int = 3) -> Optional[float]:
    """f(ordered maximum) - f(balanced point), or None when no ordered maximum exists."""
    maxima = [a for a, is_max in _family_roots(beta, q) if is_max and a > 1.0 / q]
    if not maxima:
        return None
    best = max(free_energy_f(_family_point(a, q), beta) for a in maxima)
    return best - free_energy_f(np.full(q, 1.0 / q), beta)


def critical_beta_numeric(q: int = 3, step: float = 0.002, xtol: float = 1e-12) -> float:
    """Locate the tie of balanced and ordered maxima by bracketed root finding (q >= 3)."""
    if q < 3:
        raise ModelError("tie detection needs q >= 3; the q = 2 transition is continuous")
    hi = float(q)
    if (asymmetric_tie_gap(hi, q) or 0.0) <= 0:
        raise MaximaSearchError(f"no ordered maximum above the balanced one at beta={hi}")
    while True:
        lo = hi - step
        gap = asymmetric_tie_gap(lo, q)
        if gap is None:
            step /= 2.0
            if step < 1e-10:
                raise MaximaSearchError(f"could not bracket the tie below beta={hi}")
            continue
        if gap < 0:
            break
        hi = lo
    root, info = brentq(
        lambda b: asymmetric_tie_gap(b, q), lo, hi, xtol=xtol, maxiter=200, full_output=True,
        disp=False,
    )
    if not info.converged:
        raise MaximaSearchError(f"tie detection did not converge for q={q}")
    return float(root)


@dataclass(frozen=True)
class LocalMaximum:
    point: SimplexPoint
    f_value: float
    classification: str  # "symmetric" | "asymmetric"


@dataclass(frozen=True)
class StationaryPoint:
    point: SimplexPoint
    f_value: float
    hessian_eigenvalues: Tuple[float, ...]

    @property
    def kind(self) -> str:
        eig = np.asarray(self.hessian_eigenvalues)
        if np.all(eig < -HESSIAN_TOL):
            return "maximum"
        if np.all(eig > HESSIAN_TOL):
            return "minimum"
        return "saddle"


@dataclass
class MaximaReport:
    beta: float
    q: int
    maxima: List[LocalMaximum] = field(default_factory=list)
    m_star: Optional[float] = None
    center_status: str = "maximum"
    saddles: List[StationaryPoint] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.maxima)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "q": self.q,
            "center_status": self.center_status,
            "m_star": self.m_star,
            "maxima": [
                {"point": list(m.point.coords), "f": m.f_value, "classification": m.classification}
                for m in self.maxima
            ],
            "saddles": [
                {"point": list(s.point.coords), "f": s.f_value,
                 "hessian_eigenvalues": list(s.hessian_eigenvalues)}
                for s in self.saddles
            ],
            "notes": list(self.notes),
        }


def asymmetric_stationary_points(beta: float, q: int = 3) -> List[StationaryPoint]:
    """Stationary points (alpha', alpha, ..., alpha) off the balanced point, large color first."""
    points = []
    for alpha_major, _ in _family_roots(beta, q):
        x = _newton_polish(_family_point(alpha_major, q), beta)
        eig = tuple(float(e) for e in np.linalg.eigvalsh(reduced_hessian(x, beta)))
        points.append(StationaryPoint(SimplexPoint(tuple(x)), free_energy_f(x, beta), eig))
    return points


def _permutations_of(x: np.ndarray) -> List[np.ndarray]:
    seen: List[np.ndarray] = []
    for k in range(x.size):
        # one-large family: put the distinguished coordinate at position k
        y = np.roll(x, k)
        if not any(np.allclose(y, s, atol=1e-14) for s in seen):
            seen.append(y)
    return seen


def _grid_local_maxima(beta: float, q: int, grid: int) -> List[np.ndarray]:
    from .lattice import enumerate_lattice

    lat = enumerate_lattice(grid, q)
    f = free_energy_f(lat.counts / grid, beta)
    nbr = lat.neighbors.reshape(lat.size, -1)
    valid = nbr >= 0
    nbr_f = np.where(valid, f[np.where(valid, nbr, 0)], -np.inf)
    is_max = (f >= nbr_f.max(axis=1)) & np.all(lat.counts > 0, axis=1)
    found: List[np.ndarray] = []
    for idx in np.flatnonzero(is_max):
        x0 = lat.counts[idx] / grid
        res = minimize(
            lambda y: -free_energy_f(np.append(y, 1.0 - y.sum()), beta),
            x0[:-1],
            method="SLSQP",
            bounds=[(1e-12, 1.0)] * (q - 1),
            constraints=[{"type": "ineq", "fun": lambda y: 1.0 - 1e-12 - y.sum()}],
            options={"ftol": 1e-15, "maxiter": 500},
        )
        x = _newton_polish(np.append(res.x, 1.0 - res.x.sum()), beta)
        if np.linalg.norm(free_energy_gradient(x, beta)) > 1e-8:
            continue
        if _is_local_max(x, beta):
            found.append(x)
    return found


def find_local_maxima(beta: float, q: int = 3, grid: Optional[int] = DEFAULT_GRID) -> MaximaReport:
    """All interior local maxima of f.

    Candidates are the balanced point and the permutations of (alpha', alpha, ..., alpha)
    solving the family stationarity equation; every candidate is classified by the reduced
    Hessian. A grid scan at step 1/grid guards against missed maxima (None disables it).
    """
    if beta < 0:
        raise ModelError(f"beta must be >= 0, got {beta}")
    report = MaximaReport(beta=beta, q=q)
    center = np.full(q, 1.0 / q)
    if abs(beta - q) <= HESSIAN_TOL:
        report.center_status = "degenerate"
    elif beta < q:
        report.center_status = "maximum"
        report.maxima.append(
            LocalMaximum(SimplexPoint(tuple(center)), free_energy_f(center, beta), "symmetric")
        )
    else:
        report.center_status = "not-maximum"

    majors: List[float] = []
    for sp in asymmetric_stationary_points(beta, q):
        x = sp.point.as_array()
        if sp.kind == "maximum":
            if not x[0] > 1.0 / beta:
                raise MaximaSearchError(
                    f"ordered maximum at alpha'={x[0]} violates alpha' > 1/beta"
                )
            majors.append(float(x[0]))
            for y in _permutations_of(x):
                report.maxima.append(LocalMaximum(SimplexPoint(tuple(y)), sp.f_value, "asymmetric"))
        else:
            for y in _permutations_of(x):
                report.saddles.append(
                    StationaryPoint(SimplexPoint(tuple(y)), sp.f_value, sp.hessian_eigenvalues)
                )
    if majors:
        report.m_star = max(majors)

    if grid:
        for x in _grid_local_maxima(beta, q, grid):
            known = any(np.abs(x - m.point.as_array()).sum() < 1e-6 for m in report.maxima)
            if not known:
                msg = f"grid scan found an extra maximum at {np.round(x, 8).tolist()}"
                logger.warning(msg)
                report.notes.append(msg)
                report.maxima.append(
                    LocalMaximum(SimplexPoint(tuple(x)), free_energy_f(x, beta), "asymmetric")
                )
    return report


def basin_radius(
    beta: float,
    center: Union[SimplexPoint, ArrayLike],
    directions: int = 64,
    resolution: float = 1e-3,
    seed: int = 0,
) -> float:
    """Largest 1-norm radius out to which f decreases along every sampled ray from `center`."""
    x0 = _coords(center)
    q = x0.size
    rng = np.random.default_rng(seed)
    basis = _tangent_basis(q)
    rays = [basis @ rng.standard_normal(q - 1) for _ in range(directions)]
    axis = np.full(q, -1.0 / (q - 1))
    axis[0] = 1.0
    for k in range(q):
        rays.append(np.roll(axis, k))
        rays.append(-np.roll(axis, k))
    radius = math.inf
    for v in rays:
        v = v / np.abs(v).sum()
        prev = free_energy_f(x0, beta)
        t = 0.0
        while t < radius:
            x = x0 + (t + resolution) * v
            if np.any(x <= 0):
                break
            val = free_energy_f(x, beta)
            if not val < prev:
                break
            prev = val
            t += resolution
        radius = min(radius, t)
    return float(radius)


def landscape_grid(beta: float, q: int = 3, resolution: int = DEFAULT_GRID) -> Tuple[np.ndarray, np.ndarray]:
    """Points of the simplex lattice with spacing 1/resolution and their f values."""
    from .lattice import enumerate_lattice

    pts = enumerate_lattice(resolution, q).counts / resolution
    return pts, np.asarray(free_energy_f(pts, beta))


def permutation_closed(points: Iterable[SimplexPoint], atol: float = 1e-8) -> bool:
    """Every color permutation of every point is again in the collection."""
    from itertools import permutations

    arrs = [p.as_array() for p in points]
    for x in arrs:
        for perm in permutations(range(x.size)):
            if not any(np.allclose(x[list(perm)], y, atol=atol) for y in arrs):
                return False
    return True
