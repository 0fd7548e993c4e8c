"""Exhaustive spin-level constructions used to check the lumped objects.

Everything here enumerates all q^N configurations and is meant for N <= 8.
"""
from __future__ import annotations

from itertools import product
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from .bands import EnergyBands
from .errors import InvariantError, LatticeSizeError
from .kernels import LumpedDistribution
from .lattice import SimplexLattice

MAX_SPIN_STATES = 10_000


def enumerate_configurations(N: int, q: int = 3) -> np.ndarray:
    """(q^N, N) array of 0-based colors; row r is the base-q expansion of r."""
    if q ** N > 50 * MAX_SPIN_STATES:
        raise LatticeSizeError(f"{q}^{N} configurations is too many to enumerate")
    return np.array(list(product(range(q), repeat=N)), dtype=np.int64)


def _config_counts(configs: np.ndarray, q: int) -> np.ndarray:
    return np.stack([(configs == c).sum(axis=1) for c in range(q)], axis=1)


def _config_energies(configs: np.ndarray, q: int) -> np.ndarray:
    """Pair-sum energy (1/2N) sum_{i,j} [sigma_i == sigma_j]."""
    N = configs.shape[1]
    same = configs[:, :, None] == configs[:, None, :]
    return same.sum(axis=(1, 2)) / (2.0 * N)


def class_of_configs(lattice: SimplexLattice, configs: np.ndarray) -> np.ndarray:
    return lattice.index_of(_config_counts(configs, lattice.q))


def spin_stationary_by_class(lattice: SimplexLattice, beta: float) -> LumpedDistribution:
    """Sum of e^{beta H(sigma)} over every configuration, grouped by class."""
    configs = enumerate_configurations(lattice.N, lattice.q)
    lw = beta * _config_energies(configs, lattice.q)
    cls = class_of_configs(lattice, configs)
    shift = lw.max()
    sums = np.bincount(cls, weights=np.exp(lw - shift), minlength=lattice.size)
    with np.errstate(divide="ignore"):
        log_weights = np.log(sums) + shift
    return LumpedDistribution(lattice, log_weights, float(logsumexp(log_weights)), beta)


def _single_flips(configs: np.ndarray, q: int):
    """Yield (site, index of the recolored configuration) for every single-site move."""
    N = configs.shape[1]
    place = q ** np.arange(N - 1, -1, -1)
    index = configs @ place
    for site in range(N):
        for shift in range(1, q):
            new_color = (configs[:, site] + shift) % q
            target = index + (new_color - configs[:, site]) * place[site]
            yield site, target


def spin_metropolis_matrix(N: int, q: int, beta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Dense spin-level Metropolis matrix and the configurations indexing it."""
    configs = enumerate_configurations(N, q)
    S = configs.shape[0]
    if S > MAX_SPIN_STATES:
        raise LatticeSizeError(f"dense spin matrix with {S} states is too large")
    energy = _config_energies(configs, q)
    P = np.zeros((S, S))
    rows = np.arange(S)
    for _, target in _single_flips(configs, q):
        accept = np.exp(np.minimum(0.0, beta * (energy[target] - energy)))
        P[rows, target] += accept / (2.0 * N * (q - 1))
    P[rows, rows] = 1.0 - P.sum(axis=1)
    return P, configs


def spin_ee_jump_matrix(
    N: int, q: int, bands: EnergyBands, beta_hi: float, beta_lo: float, rule: str = "tempered"
) -> Tuple[np.ndarray, np.ndarray]:
    """Dense spin-level equi-energy jump with every configuration recorded."""
    configs = enumerate_configurations(N, q)
    S = configs.shape[0]
    if S > MAX_SPIN_STATES:
        raise LatticeSizeError(f"dense spin matrix with {S} states is too large")
    energy = _config_energies(configs, q)
    band = bands.band_of_counts(_config_counts(configs, q))
    if rule == "uniform":
        log_w = np.zeros(S)
    else:
        log_w = beta_lo * energy
    P = np.zeros((S, S))
    dbeta = beta_hi - beta_lo
    for k in np.unique(band):
        members = np.flatnonzero(band == k)
        proposal = np.exp(log_w[members] - logsumexp(log_w[members]))
        dh = energy[members][None, :] - energy[members][:, None]
        P[np.ix_(members, members)] = proposal[None, :] * np.exp(np.minimum(0.0, dbeta * dh))
    np.fill_diagonal(P, 0.0)
    P[np.arange(S), np.arange(S)] = 1.0 - P.sum(axis=1)
    return P, configs


def project_spin_kernel(lattice: SimplexLattice, P: np.ndarray, configs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Lumped matrix of a spin kernel; every configuration of a class must agree."""
    cls = class_of_configs(lattice, configs)
    indicator = np.zeros((configs.shape[0], lattice.size))
    indicator[np.arange(configs.shape[0]), cls] = 1.0
    to_class = P @ indicator
    lumped = np.zeros((lattice.size, lattice.size))
    for c in range(lattice.size):
        rows = to_class[cls == c]
        spread = np.abs(rows - rows[0]).max()
        if spread > tol:
            raise InvariantError(
                "lumpability", f"class {lattice.counts[c].tolist()} rows differ by {spread:.3e}"
            )
        lumped[c] = rows[0]
    return lumped
