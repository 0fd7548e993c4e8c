from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from scipy.stats import linregress

from potts_ees.errors import FitError, ModelError
from potts_ees.kernels import ee_jump_kernel, metropolis_kernel, stationary_distribution
from potts_ees.lattice import enumerate_lattice
from potts_ees.model import ColorCount, ModelParams, SpinConfiguration, magnetization
from potts_ees.samplers import (
    ReplicaSystem,
    ee_step,
    escape_time,
    integrated_autocorrelation_time,
    kgen_step,
    make_rng,
    metropolis_chain,
    metropolis_step,
    r_sweep,
    simulate,
)

SAMPLES = 100_000


def _empirical(indices, size):
    return np.bincount(np.asarray(indices), minlength=size) / len(indices)


def _tv(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def test_make_rng_streams():
    a = make_rng(7, 1, 2).random(5)
    assert np.array_equal(a, make_rng(7, 1, 2).random(5))
    assert not np.array_equal(a, make_rng(7, 1, 3).random(5))
    assert not np.array_equal(a, make_rng(8, 1, 2).random(5))


def test_kgen_step_law(rng):
    sigma = SpinConfiguration((1, 2, 3))
    counts = Counter(kgen_step(sigma, rng).colors for _ in range(SAMPLES))
    assert len(counts) == 7
    hold = counts[sigma.colors] / SAMPLES
    assert abs(hold - 0.5) < 5 * np.sqrt(0.25 / SAMPLES)
    sd = np.sqrt((1 / 12) * (11 / 12) / SAMPLES)
    for colors, c in counts.items():
        if colors != sigma.colors:
            assert sum(a != b for a, b in zip(colors, sigma.colors)) == 1
            assert abs(c / SAMPLES - 1 / 12) < 5 * sd


def test_lumped_metropolis_step_matches_kernel_row(lattice6, rng):
    beta = 2.9
    start = ColorCount((3, 2, 1))
    draws = [lattice6.index_of(metropolis_step(start, beta, rng)) for _ in range(SAMPLES)]
    row = metropolis_kernel(lattice6, beta).dense_row(lattice6.index_of(start))
    assert _tv(_empirical(draws, lattice6.size), row) < 0.01


def test_spin_metropolis_step_lumps(lattice6, rng):
    beta = 2.9
    sigma = SpinConfiguration((1, 1, 1, 2, 2, 3))
    draws = [
        lattice6.index_of(magnetization(metropolis_step(sigma, beta, rng))) for _ in range(SAMPLES)
    ]
    row = metropolis_kernel(lattice6, beta).dense_row(lattice6.index_of((3, 2, 1)))
    assert _tv(_empirical(draws, lattice6.size), row) < 0.01


def test_metropolis_step_rejects_unknown_state(rng):
    with pytest.raises(TypeError):
        metropolis_step((1, 2, 3), 1.0, rng)


def test_ee_step_matches_jump_kernel_row(rng):
    system = ReplicaSystem.create(6, 2.9, rule="uniform")
    b = system.lattice.balanced_index
    draws = []
    for _ in range(SAMPLES):
        system.indices[1] = b
        ee_step(system, 1, rng)
        draws.append(int(system.indices[1]))
    kernel = ee_jump_kernel(
        system.lattice, system.bands, system.ladder[1], system.ladder[0],
        record=system.record, level=0, rule="uniform",
    )
    assert _tv(_empirical(draws, system.lattice.size), kernel.dense_row(b)) < 0.01


def test_level_zero_jump_is_identity(rng):
    system = ReplicaSystem.create(6, 2.9)
    before = system.indices.copy()
    for _ in range(100):
        ee_step(system, 0, rng)
    assert np.array_equal(system.indices, before)
    with pytest.raises(ModelError):
        ee_step(system, system.M + 1, rng)


def test_live_record_starts_empty_and_grows(rng):
    system = ReplicaSystem.create(6, 2.9, record="live")
    assert system.live
    assert not system.record.present.any()
    before = system.indices.copy()
    ee_step(system, 3, rng)
    assert np.array_equal(system.indices, before)
    r_sweep(system, rng, levels=(0, 2, 0))
    assert system.record.contains(2, int(system.indices[2]))
    assert system.record.present.sum() == 1
    assert system.step_count == 1


def test_create_validates():
    with pytest.raises(ModelError):
        ReplicaSystem.create(6, 2.9, record="partial")
    with pytest.raises(ModelError):
        ReplicaSystem.create(6, -1.0)
    system = ReplicaSystem.create(6, 2.9, start=(6, 0, 0))
    assert system.top == ColorCount((6, 0, 0))
    assert len(system.states) == system.M + 1 == 7


def _replica_law(system):
    """Product of the per-level Gibbs laws over joint states coded sum_i index_i * L**i."""
    law = np.ones(1)
    for beta in system.ladder.betas:
        law = np.outer(stationary_distribution(system.lattice, float(beta)).probabilities, law).ravel()
    return law


def _joint_codes(system, rng, sweeps, burn_in=1_000):
    weights = system.lattice.size ** np.arange(system.M + 1)
    for _ in range(burn_in):
        r_sweep(system, rng)
    codes = np.empty(sweeps + 1, dtype=np.int64)
    codes[0] = int(system.indices @ weights)
    for t in range(1, sweeps + 1):
        r_sweep(system, rng)
        codes[t] = int(system.indices @ weights)
    return codes


def test_top_coordinate_kernel_preserves_its_gibbs_law():
    system = ReplicaSystem.create(6, 2.0)
    M = system.M
    a = 1.0 / (M + 1)
    eye = np.eye(system.lattice.size)
    jump = ee_jump_kernel(system.lattice, system.bands, system.ladder[M], system.ladder[M - 1])
    move = metropolis_kernel(system.lattice, system.ladder[M])
    J = a * jump.matrix.toarray() + (1 - a) * eye
    K = a * move.matrix.toarray() + (1 - a) * eye
    P = J @ K @ J
    pi = stationary_distribution(system.lattice, 2.0).probabilities
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-13)
    assert np.abs(pi @ P - pi).max() < 1e-13
    flow = pi[:, None] * P
    assert np.abs(flow - flow.T).max() < 1e-13


@pytest.mark.slow
def test_joint_chain_is_reversible_for_the_replica_product_law():
    system = ReplicaSystem.create(3, 2.0, d=0.7)
    assert system.M == 2
    codes = _joint_codes(system, make_rng(11), 1_000_000)
    law = _replica_law(system)
    size = law.size
    counts = np.zeros((size, size))
    np.add.at(counts, (codes[:-1], codes[1:]), 1.0)
    both = counts + counts.T
    seen = both >= 30
    z = np.abs(counts - counts.T)[seen] / np.sqrt(both[seen])
    assert seen.sum() > 100
    assert z.max() < 6.0
    assert _tv(_empirical(codes, size), law) < 0.06


@pytest.mark.slow
def test_joint_chain_keeps_the_top_level_gibbs_law():
    system = ReplicaSystem.create(6, 2.0)
    rng = make_rng(11)
    for _ in range(10_000):
        r_sweep(system, rng)
    # the top coordinate decorrelates over ~10^2 sweeps
    draws = np.empty(4_000_000, dtype=np.int64)
    for t in range(draws.size):
        r_sweep(system, rng)
        draws[t] = system.indices[-1]
    pi = stationary_distribution(system.lattice, 2.0)
    assert _tv(_empirical(draws, system.lattice.size), pi.probabilities) < 0.01

def test_escape_time(rng):
    system = ReplicaSystem.create(12, 2.0)
    t = escape_time(system, 0.05, 10_000, rng)
    assert isinstance(t, int) and 1 <= t <= 10_000
    stuck = ReplicaSystem.create(12, 2.0)
    assert escape_time(stuck, 2.0, 5, rng) is None
    assert stuck.step_count == 5


def test_zero_epsilon_escapes_at_the_first_move():
    system = ReplicaSystem.create(12, 2.9)
    b = system.lattice.balanced_index
    t = escape_time(system, 0.0, 10_000, make_rng(5))
    assert isinstance(t, int) and t >= 1
    assert system.indices[-1] != b
    replay = ReplicaSystem.create(12, 2.9)
    rng = make_rng(5)
    sweeps = 0
    while replay.indices[-1] == b:
        r_sweep(replay, rng)
        sweeps += 1
    assert sweeps == t


def _median_escape(N, beta, seeds, max_sweeps):
    times = []
    for seed in seeds:
        system = ReplicaSystem.create(N, beta, d=1.0)
        t = escape_time(system, 0.3, max_sweeps, make_rng(0, N, seed))
        times.append(np.inf if t is None else t)
    return float(np.median(times))


@pytest.mark.slow
def test_escape_medians_grow_with_n_above_the_critical_point():
    medians = [_median_escape(N, 2.9, range(20), 400_000) for N in (24, 48, 96)]
    assert medians[0] < medians[1] < medians[2]
    assert np.isfinite(medians[0])


@pytest.mark.slow
def test_metropolis_autocorrelation_grows_subquadratically_at_high_temperature():
    ns = (24, 48, 96)
    taus = []
    for N in ns:
        series = metropolis_chain(enumerate_lattice(N), 2.0, 200_000, make_rng(0, N))
        taus.append(integrated_autocorrelation_time(series))
    slope = linregress(np.log(ns), np.log(taus)).slope
    assert 0 < slope < 2


def test_simulate_is_reproducible():
    params = ModelParams(N=12, beta=2.0)
    a = simulate(params, sweeps=100, stride=10, seed=3)
    b = simulate(params, sweeps=100, stride=10, seed=3)
    assert len(a) == 11
    assert a.sweeps[0] == 0 and a.sweeps[-1] == 100
    assert np.allclose(a.fractions.sum(axis=1), 1.0)
    assert a.dist_a0[0] == 0.0
    assert np.array_equal(a.fractions, b.fractions)
    assert a.header == ["sweep", "m1", "m2", "m3", "energy", "dist_a0"]
    assert len(list(a.rows())) == 11
    with pytest.raises(ModelError):
        simulate(params, sweeps=10, stride=0, seed=0)


def test_metropolis_chain(rng):
    lat = enumerate_lattice(12)
    series = metropolis_chain(lat, 2.0, 200, rng)
    assert series.shape == (201,)
    assert series[0] == 0.0
    assert np.all(series >= 0)


def test_autocorrelation_of_white_noise(rng):
    tau = integrated_autocorrelation_time(rng.standard_normal(20_000))
    assert 0.8 < tau < 1.25


def test_autocorrelation_of_ar1(rng):
    phi = 0.9
    noise = rng.standard_normal(200_000)
    x = np.empty_like(noise)
    x[0] = noise[0]
    for t in range(1, x.size):
        x[t] = phi * x[t - 1] + noise[t]
    tau = integrated_autocorrelation_time(x)
    assert tau == pytest.approx((1 + phi) / (1 - phi), rel=0.25)


def test_autocorrelation_rejects_degenerate_series():
    with pytest.raises(FitError):
        integrated_autocorrelation_time(np.ones(100))
    with pytest.raises(FitError):
        integrated_autocorrelation_time([1.0])
