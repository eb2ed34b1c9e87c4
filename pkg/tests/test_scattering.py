import math

import numpy as np
import pytest

from bosonperm.errors import CapacityError, DimensionError, ValidationError
from bosonperm.scattering import (
    bunching_event,
    check_unitary,
    cyclic_input,
    effective_matrix,
    enumerate_events,
    event_count,
    fourier_unitary,
    haar_random_unitary,
    make_rng,
    mode_assignment,
    normalization_factor,
    occupation_from_assignment,
    random_event,
)


def test_mode_assignment_zero_based():
    assert mode_assignment((1, 0, 1, 0, 1, 0)) == (0, 2, 4)
    assert mode_assignment((2, 0, 1)) == (0, 0, 2)
    assert occupation_from_assignment((0, 0, 2), 3) == (2, 0, 1)


def test_invalid_occupations():
    with pytest.raises(ValidationError):
        mode_assignment((1, -1))
    with pytest.raises(ValidationError):
        mode_assignment((1.5, 0))


def test_effective_matrix_rows_and_columns():
    U = np.arange(36).reshape(6, 6).astype(complex)
    M = effective_matrix(U, (1, 0, 1, 0, 1, 0), (1, 0, 1, 0, 0, 1))
    assert np.array_equal(M, U[np.ix_([0, 2, 4], [0, 2, 5])])
    M = effective_matrix(U, (2, 0, 0, 0, 0, 1), (0, 1, 0, 0, 2, 0))
    assert np.array_equal(M, U[np.ix_([0, 0, 5], [1, 4, 4])])


def test_effective_matrix_errors():
    U = np.eye(3)
    with pytest.raises(ValidationError):
        effective_matrix(U, (1, 1, 0), (1, 0, 0))
    with pytest.raises(DimensionError):
        effective_matrix(U, (1, 1), (1, 1))


@pytest.mark.parametrize("m", [1, 2, 5, 9])
def test_fourier_is_unitary_and_phase_equivalent(m):
    F = check_unitary(fourier_unitary(m))
    G = fourier_unitary(m, one_based=False)
    assert np.allclose(np.abs(F), np.abs(G))
    assert F[0, 0] == pytest.approx(np.exp(2j * np.pi / m) / np.sqrt(m))


def test_check_unitary_rejects():
    with pytest.raises(ValidationError):
        check_unitary(2 * np.eye(3))
    with pytest.raises(DimensionError):
        check_unitary(np.ones((2, 3)))


def test_haar_unitary_and_reproducible():
    U = haar_random_unitary(6, 1)
    check_unitary(U)
    assert np.array_equal(U, haar_random_unitary(6, 1))
    assert not np.array_equal(U, haar_random_unitary(6, 2))


def test_haar_moments():
    # E|U_ij|^2 = 1/m, E|U_ij|^4 = 2/(m(m+1)), E U_ij = 0
    m, count = 4, 4000
    rng = make_rng(123)
    samples = np.array([haar_random_unitary(m, rng)[0, 1] for _ in range(count)])
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(1 / m, abs=0.01)
    assert np.mean(np.abs(samples) ** 4) == pytest.approx(2 / (m * (m + 1)), abs=0.01)
    assert abs(np.mean(samples)) < 0.03


def test_haar_phases_uniform():
    # without phase correction the diagonal of R is positive and arg U_00 is biased
    rng = make_rng(5)
    phases = np.array([np.angle(haar_random_unitary(3, rng)[0, 0]) for _ in range(4000)])
    assert abs(np.mean(np.exp(1j * phases))) < 0.05


@pytest.mark.parametrize("m,n", [(2, 2), (4, 3), (6, 3), (5, 5)])
def test_event_enumeration_counts(m, n):
    events = enumerate_events(m, n)
    assert len(events) == event_count(m, n) == math.comb(m + n - 1, n)
    assert len(set(events)) == len(events)
    assert all(sum(e) == n and len(e) == m for e in events)
    free = enumerate_events(m, n, collision_free=True)
    assert len(free) == math.comb(m, n)
    assert all(max(e) == 1 for e in free)


def test_event_order():
    assert enumerate_events(2, 2) == [(2, 0), (1, 1), (0, 2)]


def test_event_capacity():
    with pytest.raises(CapacityError):
        enumerate_events(40, 12)


def test_random_event_uniform():
    rng = make_rng(3)
    counts = {}
    for _ in range(6000):
        e = random_event(3, 2, rng)
        counts[e] = counts.get(e, 0) + 1
    assert len(counts) == 6
    assert max(counts.values()) / min(counts.values()) < 1.25


def test_normalization_and_helpers():
    assert normalization_factor((2, 1, 0), (0, 3, 0)) == pytest.approx(1 / 12)
    assert bunching_event(4, 3, 2) == (0, 0, 3, 0)
    assert cyclic_input(3, 9) == (1, 0, 0, 1, 0, 0, 1, 0, 0)
    with pytest.raises(ValidationError):
        cyclic_input(4, 9)


def test_rng_streams_independent_and_stable():
    a = make_rng(7, 1, 2).random(3)
    assert np.array_equal(a, make_rng(7, 1, 2).random(3))
    assert not np.array_equal(a, make_rng(7, 1, 3).random(3))
