from __future__ import annotations

import math

import numpy as np
import pytest

from potts_ees.errors import (
    BallTooSmallError,
    FitError,
    ModelError,
    NonReversibleKernelError,
)
from potts_ees.kernels import (
    LumpedDistribution,
    LumpedKernel,
    metropolis_kernel,
    stationary_distribution,
)
from potts_ees.lattice import enumerate_lattice
from potts_ees.model import find_local_maxima
from potts_ees.spectral import (
    ConductanceReport,
    CutFamily,
    ball_cut_ratio,
    cheeger_check,
    conductance_of_set,
    exact_conductance,
    family_conductance,
    family_cuts,
    fit_exponential_rate,
    lifted_cut_conductance_bound,
    relaxation_time,
    spectral_gap,
    standard_families,
)

A0 = np.full(3, 1 / 3)


@pytest.fixture
def two_state():
    kernel = LumpedKernel.from_dense([[0.9, 0.1], [0.2, 0.8]])
    pi = LumpedDistribution.from_probabilities([2 / 3, 1 / 3])
    return kernel, pi


def _metropolis(N, beta):
    lat = enumerate_lattice(N)
    return lat, metropolis_kernel(lat, beta), stationary_distribution(lat, beta)


def _dense_conductance(kernel, pi, S):
    P = kernel.matrix.toarray()
    p = pi.probabilities
    inside = np.zeros(kernel.size, dtype=bool)
    inside[list(S)] = True
    flow = sum(p[x] * P[x, y] for x in np.flatnonzero(inside) for y in np.flatnonzero(~inside))
    return flow / p[inside].sum()


def test_two_state_conductance(two_state):
    kernel, pi = two_state
    small = conductance_of_set(kernel, pi, [1])
    assert small.phi == pytest.approx(0.2)
    assert small.flow == pytest.approx(1 / 15)
    assert not small.exceeds_half
    big = conductance_of_set(kernel, pi, [0])
    assert big.exceeds_half and big.phi == pytest.approx(0.1)
    phi, members = exact_conductance(kernel, pi)
    assert phi == pytest.approx(0.2)
    with pytest.raises(ModelError):
        conductance_of_set(kernel, pi, [])


def test_conductance_of_set_matches_dense_reference(rng):
    lat, kernel, pi = _metropolis(12, 2.9)
    for _ in range(5):
        S = rng.choice(lat.size, size=20, replace=False)
        assert conductance_of_set(kernel, pi, S).phi == pytest.approx(
            _dense_conductance(kernel, pi, S), abs=1e-12
        )


def test_conductance_of_set_accepts_a_boolean_mask(rng):
    lat, kernel, pi = _metropolis(12, 2.9)
    S = rng.choice(lat.size, size=20, replace=False)
    mask = np.zeros(lat.size, dtype=bool)
    mask[S] = True
    by_mask = conductance_of_set(kernel, pi, mask)
    by_index = conductance_of_set(kernel, pi, S)
    assert by_mask.phi == pytest.approx(by_index.phi, abs=1e-15)
    assert by_mask.mass == pytest.approx(pi.mass(S))
    # a two-element mask is not the index set {0, 1}
    assert conductance_of_set(kernel, pi, mask).mass != pytest.approx(pi.mass([0, 1]))
    with pytest.raises(ModelError):
        conductance_of_set(kernel, pi, mask[:-1])


def test_two_state_gap(two_state):
    kernel, pi = two_state
    assert spectral_gap(kernel, pi) == pytest.approx(0.3)
    assert relaxation_time(0.3) == pytest.approx(1 / 0.3)
    assert relaxation_time(0.0) == math.inf


def test_power_iteration_agrees_with_dense():
    _, kernel, pi = _metropolis(12, 2.0)
    dense = spectral_gap(kernel, pi)
    iterative = spectral_gap(kernel, pi, dense_limit=0)
    assert iterative == pytest.approx(dense, abs=1e-8)


def test_gap_requires_reversibility():
    cycle = LumpedKernel.from_dense([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    uniform = LumpedDistribution.from_probabilities([1 / 3] * 3)
    with pytest.raises(NonReversibleKernelError):
        spectral_gap(cycle, uniform)


def test_family_cuts_score_the_smaller_side():
    lat, kernel, pi = _metropolis(12, 2.0)
    cuts = family_cuts(kernel, pi, CutFamily.ball(lat, A0))
    assert cuts
    assert all(0 < c.mass <= 0.5 + 1e-12 for c in cuts)
    radii = [c.radius for c in cuts]
    assert radii == sorted(radii)
    first = cuts[0]
    # the innermost ball is the balanced class alone
    ref = conductance_of_set(kernel, pi, [lat.balanced_index])
    assert first.size == 1
    assert first.phi == pytest.approx(ref.phi, rel=1e-12)


def test_family_cut_agrees_with_set_conductance():
    lat, kernel, pi = _metropolis(12, 2.9)
    family = CutFamily.level_sets(pi)
    for cut in family_cuts(kernel, pi, family)[:10]:
        members = family.order[: cut.size]
        direct = conductance_of_set(kernel, pi, members)
        smaller = min(direct.mass, 1 - direct.mass)
        assert cut.flow == pytest.approx(direct.flow, abs=1e-14)
        assert cut.mass == pytest.approx(smaller, rel=1e-12)


@pytest.mark.parametrize("N", [3, 4])
@pytest.mark.parametrize("beta", [2.0, 2.9])
def test_cheeger_sandwich_with_exact_minimum(N, beta):
    lat, kernel, pi = _metropolis(N, beta)
    check = cheeger_check(kernel, pi, standard_families(lat, pi, beta))
    assert check.phi_exact is not None
    assert check.phi_exact <= check.phi_family + 1e-12
    assert check.phi_exact**2 / 2 <= check.gap + 1e-12
    assert check.gap <= 2 * check.phi_exact + 1e-12
    assert check.ok


@pytest.mark.parametrize("N", [6, 12, 18, 24])
@pytest.mark.parametrize("beta", [1.0, 2.0, 2.77, 2.9])
def test_cheeger_upper_bound_on_families(N, beta):
    lat, kernel, pi = _metropolis(N, beta)
    phi, _ = family_conductance(kernel, pi, standard_families(lat, pi, beta))
    assert spectral_gap(kernel, pi) <= 2 * phi + 1e-12


def test_gap_shrinks_with_n_at_2_9():
    gaps = [spectral_gap(*_metropolis(N, 2.9)[1:]) for N in (12, 24, 36)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_ball_ratio_errors():
    lat = enumerate_lattice(7)
    pi = stationary_distribution(lat, 2.0)
    with pytest.raises(BallTooSmallError):
        ball_cut_ratio(pi, A0, 0.3, 0.1)
    with pytest.raises(ModelError):
        ball_cut_ratio(pi, A0, 0.1, 0.3)


def test_ball_ratio_at_2_0_has_no_real_exponential_decay():
    ns = [30, 60, 90, 120, 150]
    ratios = [ball_cut_ratio(stationary_distribution(enumerate_lattice(N), 2.0), A0, 0.3, 0.15) for N in ns]
    assert all(0 < r < 1 for r in ratios)
    assert fit_exponential_rate(ns, ratios).rate < 10 / max(ns)


@pytest.mark.slow
def test_ball_ratio_around_ordered_maximum_decays_exponentially():
    report = find_local_maxima(2.9, grid=None)
    a1 = max(
        (m.point.as_array() for m in report.maxima if m.classification == "asymmetric"),
        key=lambda x: x[0],
    )
    ns = [300, 600, 900, 1200, 1500]
    ratios = [
        ball_cut_ratio(stationary_distribution(enumerate_lattice(N), 2.9), a1, 0.3, 0.15)
        for N in ns
    ]
    fit = fit_exponential_rate(ns, ratios)
    assert fit.rate > 0
    assert fit.r_squared > 0.99


def test_lifted_bound_premise_and_value():
    lat = enumerate_lattice(120)
    pi = stationary_distribution(lat, 2.9)
    bound = lifted_cut_conductance_bound(pi, 0.3, 0.1)
    assert bound.premise_ok
    assert bound.max_reach_distance <= 0.3
    assert bound.bound == ball_cut_ratio(pi, A0, 0.3, 0.1)


def test_fit_recovers_exact_rate():
    ns = np.array([10, 20, 30, 40, 50])
    fit = fit_exponential_rate(ns, np.exp(-0.2 * ns))
    assert fit.rate == pytest.approx(0.2, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    flat = fit_exponential_rate(ns, np.full(5, 0.3))
    assert flat.rate == pytest.approx(0.0, abs=1e-10)
    assert flat.r_squared == 1.0


def test_fit_rejects_bad_input():
    with pytest.raises(FitError):
        fit_exponential_rate([1, 2, 3], [1.0, 0.5, 0.25])
    with pytest.raises(FitError):
        fit_exponential_rate([1, 2, 3, 4], [1.0, 0.5, 0.0, 0.25])


def test_conductance_report_sorts_rows():
    report = ConductanceReport()
    report.add(60, 2.9, 0.2, 0.01, 0.3, None)
    report.add(30, 2.9, 0.1, 0.02, 0.2, 0.5)
    report.fits["x"] = fit_exponential_rate([1, 2, 3, 4], [1.0, 0.5, 0.25, 0.125])
    d = report.to_dict()
    assert [r["N"] for r in d["rows"]] == [30, 60]
    assert d["fits"]["x"]["rate"] == pytest.approx(math.log(2))
