"""Named invariant checks run by `potts-ees selftest` at small N."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import kernels, oracles
from .bands import EnergyBands, TemperatureLadder
from .errors import InvariantError, PottsError
from .lattice import enumerate_lattice
from .model import critical_beta, critical_beta_numeric, find_local_maxima
from .spectral import cheeger_check, standard_families

logger = logging.getLogger(__name__)

TOL = 1e-12


def _ladder_pairs(N: int, beta: float, d: float = 1.0, levels: Sequence[int] = (1, -1)):
    bands = EnergyBands.from_density(N, d)
    ladder = TemperatureLadder(beta, bands.M)
    for lv in levels:
        i = lv % (bands.M + 1)
        yield bands, ladder[i], ladder[i - 1]


def check_row_stochasticity() -> None:
    for N in (4, 6):
        lattice = enumerate_lattice(N)
        for beta in (0.0, 2.0, 2.9):
            kernels.metropolis_kernel(lattice, beta).check(TOL)
            if beta == 0:
                continue
            for bands, hi, lo in _ladder_pairs(N, beta):
                for rule in kernels.JUMP_RULES:
                    kernels.ee_jump_kernel(lattice, bands, hi, lo, rule=rule).check(TOL)


def check_detailed_balance() -> None:
    for N in (4, 6, 12):
        lattice = enumerate_lattice(N)
        for beta in (2.0, 2.9):
            k = kernels.metropolis_kernel(lattice, beta)
            pi = kernels.stationary_distribution(lattice, k.reversible_beta)
            err = k.detailed_balance_error(pi)
            if err > TOL:
                raise InvariantError("detailed_balance", f"metropolis N={N} beta={beta}: {err:.3e}")
            for bands, hi, lo in _ladder_pairs(N, beta):
                for rule in kernels.JUMP_RULES:
                    k = kernels.ee_jump_kernel(lattice, bands, hi, lo, rule=rule)
                    pi = kernels.stationary_distribution(lattice, k.reversible_beta)
                    err = k.detailed_balance_error(pi)
                    if err > TOL:
                        raise InvariantError(
                            "detailed_balance", f"{rule} jump N={N} beta={hi:.4g}: {err:.3e}"
                        )


def check_lumpability_metropolis() -> None:
    for N in (4, 6):
        lattice = enumerate_lattice(N)
        for beta in (0.0, 2.9):
            P, configs = oracles.spin_metropolis_matrix(N, 3, beta)
            lumped = oracles.project_spin_kernel(lattice, P, configs)
            diff = np.abs(lumped - kernels.metropolis_kernel(lattice, beta).matrix.toarray()).max()
            if diff > TOL:
                raise InvariantError("lumpability_metropolis", f"N={N} beta={beta}: {diff:.3e}")


def check_lumpability_ee_jump() -> None:
    for N in (4, 6):
        lattice = enumerate_lattice(N)
        for bands, hi, lo in _ladder_pairs(N, 2.9):
            for rule in kernels.JUMP_RULES:
                P, configs = oracles.spin_ee_jump_matrix(N, 3, bands, hi, lo, rule)
                lumped = oracles.project_spin_kernel(lattice, P, configs)
                ref = kernels.ee_jump_kernel(lattice, bands, hi, lo, rule=rule).matrix.toarray()
                diff = np.abs(lumped - ref).max()
                if diff > TOL:
                    raise InvariantError("lumpability_ee_jump", f"{rule} N={N}: {diff:.3e}")


def check_stationary_oracle() -> None:
    for N in (4, 6, 8):
        lattice = enumerate_lattice(N)
        for beta in (0.0, 2.0, 2.9):
            tv = kernels.stationary_distribution(lattice, beta).total_variation(
                oracles.spin_stationary_by_class(lattice, beta)
            )
            if tv > TOL:
                raise InvariantError("stationary_oracle", f"N={N} beta={beta}: TV {tv:.3e}")


def check_band_locality() -> None:
    for N in (30, 60, 120):
        lattice = enumerate_lattice(N)
        for bands, hi, lo in _ladder_pairs(N, 2.9, levels=(1, N // 2, -1)):
            k = kernels.ee_jump_kernel(lattice, bands, hi, lo)
            excess = kernels.band_locality_violation(k, bands)
            if excess > TOL:
                raise InvariantError("band_locality", f"N={N}: bound exceeded by {excess:.3e}")


def check_cheeger_sandwich() -> None:
    for N in (4, 6, 12):
        lattice = enumerate_lattice(N)
        for beta in (2.0, 2.9):
            k = kernels.metropolis_kernel(lattice, beta)
            pi = kernels.stationary_distribution(lattice, beta)
            res = cheeger_check(k, pi, standard_families(lattice, pi, beta))
            if not res.ok:
                raise InvariantError(
                    "cheeger_sandwich",
                    f"N={N} beta={beta}: gap={res.gap:.6g}, phi_family={res.phi_family:.6g}, "
                    f"phi_exact={res.phi_exact}",
                )


def check_landscape_structure() -> None:
    for beta, expected in ((2.0, 1), (2.9, 4), (3.2, 3)):
        report = find_local_maxima(beta)
        if report.count != expected:
            raise InvariantError(
                "landscape_structure", f"beta={beta}: {report.count} maxima, expected {expected}"
            )


def check_critical_beta_crosscheck() -> None:
    for q in (3, 4):
        diff = abs(critical_beta_numeric(q) - critical_beta(q))
        if diff > 1e-6:
            raise InvariantError("critical_beta_crosscheck", f"q={q}: closed form off by {diff:.3e}")


def check_balanced_class_contrast() -> None:
    cases = ((2, 50, 2.5, "min"), (3, 60, 2.9, "max"), (3, 60, 2.0, "max"))
    for q, N, beta, kind in cases:
        pi = kernels.stationary_distribution(enumerate_lattice(N, q), beta)
        profile = kernels.balanced_class_profile(pi)
        ok = profile.strict_min if kind == "min" else profile.strict_max
        if not ok:
            raise InvariantError(
                "balanced_class_contrast", f"q={q} N={N} beta={beta}: balanced class is not a strict local {kind}"
            )


CHECKS: Dict[str, Callable[[], None]] = {
    "row_stochasticity": check_row_stochasticity,
    "detailed_balance": check_detailed_balance,
    "lumpability_metropolis": check_lumpability_metropolis,
    "lumpability_ee_jump": check_lumpability_ee_jump,
    "stationary_oracle": check_stationary_oracle,
    "band_locality": check_band_locality,
    "cheeger_sandwich": check_cheeger_sandwich,
    "landscape_structure": check_landscape_structure,
    "critical_beta_crosscheck": check_critical_beta_crosscheck,
    "balanced_class_contrast": check_balanced_class_contrast,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    message: str = ""


def run_selftest(only: Optional[Sequence[str]] = None) -> List[CheckResult]:
    names = list(only) if only else list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {', '.join(unknown)}")
    results = []
    for name in names:
        try:
            CHECKS[name]()
        except InvariantError as exc:
            results.append(CheckResult(name, False, str(exc)))
        except (PottsError, ArithmeticError, ValueError) as exc:
            results.append(CheckResult(name, False, f"{name}: {type(exc).__name__}: {exc}"))
        else:
            results.append(CheckResult(name, True))
    return results
