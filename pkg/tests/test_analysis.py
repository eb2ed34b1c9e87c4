import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bosonperm.analysis import (
    FIELDS,
    EventDistribution,
    best_mixture,
    bound_check,
    bunching_ratio,
    choose_events,
    distribution,
    estimate_scale,
    fourier_scan,
    haar_id_dist_distances,
    interference_sums,
    mixture_objective,
    random_scan,
    sample_events,
    spearman,
    total_variation,
    transition_sweep,
    zero_probability_search,
)
from bosonperm.distinguishability import MixedEnsemble, random_states
from bosonperm.errors import NumericalConsistencyError, ValidationError
from bosonperm.permanent import permanent
from bosonperm.probability import ScatteringInstance
from bosonperm.scattering import enumerate_events, haar_random_unitary, make_rng

BS = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def test_hom_distribution_object():
    x = 0.4
    inst = ScatteringInstance(BS, (1, 1), np.array([[1, x], [x, 1]]))
    dist = distribution(inst)
    assert dist.events == ((2, 0), (1, 1), (0, 2))
    assert np.allclose(dist.probabilities, [(1 + x * x) / 4, (1 - x * x) / 2, (1 + x * x) / 4], atol=1e-12)
    assert dist.coverage == "complete"


def test_incomplete_distribution_must_be_flagged():
    with pytest.raises(NumericalConsistencyError):
        EventDistribution(((1, 0), (0, 1)), np.array([0.2, 0.3]))
    EventDistribution(((1, 0),), np.array([0.2]), coverage="sampled")


def test_total_variation_unhalved():
    assert total_variation([1, 0], [0, 1]) == 2.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    with pytest.raises(ValidationError):
        total_variation([1.0], [0.5, 0.5])


def brute_best(a, b, c):
    gammas = np.linspace(-2, 3, 50001)
    vals = [mixture_objective(a, b, c, g) for g in gammas]
    return min(vals)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10**6))
def test_best_mixture_is_global_minimum(k, seed):
    rng = make_rng(seed)
    a, b, c = (rng.dirichlet(np.ones(k)) for _ in range(3))
    fit = best_mixture(a, b, c)
    assert fit.delta == pytest.approx(mixture_objective(a, b, c, fit.gamma_best))
    assert fit.delta <= brute_best(a, b, c) + 1e-9
    # no candidate from the full breakpoint list does better
    live = b != a
    for g in (c[live] - a[live]) / (b[live] - a[live]):
        assert fit.delta <= mixture_objective(a, b, c, g) + 1e-12


def test_best_mixture_exact_recovery_and_degenerate():
    a, b = np.array([0.5, 0.5, 0.0]), np.array([0.2, 0.3, 0.5])
    fit = best_mixture(a, b, 0.7 * a + 0.3 * b)
    assert fit.gamma_best == pytest.approx(0.3, abs=1e-12) and fit.delta < 1e-12
    fit = best_mixture(a, a, b)
    assert fit.degenerate and math.isnan(fit.gamma_best)


def test_best_mixture_may_leave_unit_interval():
    a, b = np.array([0.6, 0.4]), np.array([0.4, 0.6])
    fit = best_mixture(a, b, np.array([0.8, 0.2]))
    assert fit.gamma_best == pytest.approx(-1.0) and fit.delta < 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_bounds_hold(seed):
    U = haar_random_unitary(6, seed)
    states = random_states(3, 2, make_rng(seed, 1))
    inst = ScatteringInstance(U, (1, 1, 1, 0, 0, 0), states)
    for s in enumerate_events(6, 3)[::4]:
        rep = bound_check(inst, s, "absolute")
        assert rep.applicable and rep.holds
        real = bound_check(inst, s, "real", S=np.array(inst.distinguishability().real))
        assert real.applicable and real.holds


def test_bound_regimes_are_reported():
    U = haar_random_unitary(4, 0)
    S = np.array([[1, 0.5j], [-0.5j, 1]])
    inst = ScatteringInstance(U, (1, 1, 0, 0), S)
    assert not bound_check(inst, (1, 1, 0, 0), "nonnegative").applicable
    assert not bound_check(inst, (1, 1, 0, 0), "real").applicable
    doubled = ScatteringInstance(U, (2, 0, 0, 0), np.ones((1, 1)))
    assert not bound_check(doubled, (1, 1, 0, 0), "absolute").applicable
    with pytest.raises(ValidationError):
        bound_check(inst, (1, 1, 0, 0), "other")


def test_nonnegative_bound_saturates_on_bunching():
    U = haar_random_unitary(5, 2)
    S = np.array([[1, 0.3, 0.6], [0.3, 1, 0.2], [0.6, 0.2, 1]])
    inst = ScatteringInstance(U, (1, 1, 1, 0, 0), S)
    rep = bound_check(inst, (0, 0, 3, 0, 0), "nonnegative")
    assert rep.holds and rep.lhs == pytest.approx(rep.rhs, rel=1e-10)


@pytest.mark.parametrize("r", [(1, 1, 1, 0), (2, 1, 0, 0), (1, 0, 2, 0)])
def test_bunching_law(r):
    U = haar_random_unitary(4, 8)
    occupied = sum(1 for v in r if v)
    inst = ScatteringInstance(U, r, random_states(occupied, 2, 3))
    S = inst.distinguishability()
    expected = permanent(S).real / math.prod(math.factorial(v) for v in r)
    for mode in range(4):
        assert bunching_ratio(inst, mode) == pytest.approx(expected, rel=1e-9)


def test_sampling_matches_distribution():
    inst = ScatteringInstance(BS, (1, 1), np.array([[1, 0.5], [0.5, 1]]))
    dist = distribution(inst)
    draws = sample_events(dist, 20000, 4)
    freq = np.array([draws.count(e) for e in dist.events]) / len(draws)
    assert np.allclose(freq, dist.probabilities, atol=0.015)
    assert sample_events(dist, 50, 4) == draws[:50]


def test_choose_events_policies():
    rng = make_rng(0)
    evs, cov = choose_events(6, 3, "complete", rng)
    assert cov == "complete" and len(evs) == 56
    evs, cov = choose_events(6, 3, "sampled:10", rng)
    assert cov == "sampled" and len(set(evs)) == 10
    evs, cov = choose_events(6, 3, "sampled:1000", rng)
    assert cov == "complete"
    evs, cov = choose_events(30, 7, "auto", rng)
    assert cov == "sampled"
    with pytest.raises(ValidationError):
        choose_events(6, 3, "most", rng)


def test_transition_sweep_shape_and_endpoints():
    rows = transition_sweep(3, 2, x_grid=5, seed=1)
    assert len(rows) == 10
    assert tuple(rows[0].as_dict()) == FIELDS
    for rec in rows:
        if rec.x == 0.0:
            assert rec.d_dist < 1e-12 and rec.gamma_best == pytest.approx(1.0)
        if rec.x == 1.0:
            assert rec.d_id < 1e-12 and rec.gamma_best == pytest.approx(0.0, abs=1e-12)
        assert rec.d_id + rec.d_dist >= rec.d_id_dist - 1e-12
    again = transition_sweep(3, 2, x_grid=5, seed=1)
    assert [r.as_dict() for r in again] == [r.as_dict() for r in rows]


def test_transition_cells_are_independent():
    full = transition_sweep(3, 3, x_grid=3, seed=9)
    # the repetition streams do not depend on how many repetitions run
    part = transition_sweep(3, 1, x_grid=3, seed=9)
    assert [r.as_dict() for r in full[:3]] == [r.as_dict() for r in part]


def test_random_scan_records():
    rows = random_scan(3, 4, dims=[1, 2], seed=2)
    assert len(rows) == 8
    d1 = [r for r in rows if r.D == 1]
    # one internal dimension: every state identical up to phase -> identical bosons
    assert all(r.d_id < 1e-10 and r.delta < 1e-10 for r in d1)
    assert all(1 - 1e-9 <= r.perm_S <= 6 + 1e-9 for r in rows)


def test_fourier_scan_suppression():
    rows = fourier_scan([2, 3], baseline_repetitions=3, seed=0)
    fourier = {r.n: r for r in rows if r.network == "fourier"}
    assert fourier[2].d_id_dist == pytest.approx(1.0, abs=1e-10)
    assert fourier[3].d_id_dist == pytest.approx(4 / 3, abs=1e-10)
    for n in (2, 3):
        base = [r.d_id_dist for r in rows if r.n == n and r.network == "haar"]
        assert len(base) == 3 and fourier[n].d_id_dist > max(base)


def test_haar_distances_reproducible():
    a = haar_id_dist_distances(3, 3, seed=4)
    b = haar_id_dist_distances(3, 3, seed=4)
    assert [r.d_id_dist for r in a] == [r.d_id_dist for r in b]
    assert all(0 < r.d_id_dist < 2 for r in a)


@pytest.mark.parametrize("n", [2, 3])
def test_interference_sums_vanish(n):
    U = haar_random_unitary(2 * n, n)
    sums = interference_sums(U, tuple([1] * n + [0] * n))
    for sigma, value in sums.items():
        if sigma == tuple(range(n)):
            assert value == pytest.approx(1.0)
        else:
            assert abs(value) < 1e-10


def test_zero_probability_search_finds_nothing():
    report = zero_probability_search(3, 2, 3, seed=1)
    assert report.instances == 2 * 3 * 56
    assert report.violations == []


def test_spearman_sign():
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)


def test_mixture_recovery_with_trivial_ensemble():
    U = haar_random_unitary(6, 1)
    inst = ScatteringInstance(U, (1, 1, 1, 0, 0, 0), MixedEnsemble.trivial_mixture(3, 0.7))
    p_s = distribution(inst, kind="partial")
    p_id = distribution(inst, kind="id")
    p_dist = distribution(inst, kind="dist")
    fit = best_mixture(p_id, p_dist, p_s)
    assert fit.gamma_best == pytest.approx(0.7, abs=1e-9) and fit.delta <= 1e-9


def test_sampled_distance_estimator_is_unbiased():
    # same networks, complete enumeration vs 20 of 56 sampled events
    complete = haar_id_dist_distances(3, 150, seed=6)
    sampled = haar_id_dist_distances(3, 150, seed=6, events="sampled:20")
    assert {r.coverage for r in sampled} == {"sampled"}
    assert estimate_scale(6, 3, 20, "sampled") == pytest.approx(56 / 20)
    a = np.mean([r.d_id_dist for r in complete])
    b = np.mean([r.d_id_dist for r in sampled])
    assert b == pytest.approx(a, abs=0.05)
