"""Modes, events and networks.

Occupations are tuples of non-negative counts per mode; assignments list
the (0-based) mode of each particle in non-decreasing order. Unitaries are
dense complex ``numpy`` arrays with rows indexed by input mode and columns
by output mode.
"""

from __future__ import annotations

import math
from itertools import combinations, combinations_with_replacement

import numpy as np

from .errors import CapacityError, DimensionError, ValidationError

MAX_EVENTS = 10_000_000
UNITARY_TOL = 1e-10


def as_occupation(r) -> tuple[int, ...]:
    occ = tuple(int(v) for v in r)
    if any(v != float(x) for v, x in zip(occ, r)):
        raise ValidationError(f"occupations must be integers, got {list(r)}")
    if any(v < 0 for v in occ):
        raise ValidationError(f"negative occupation in {occ}")
    return occ


def mode_assignment(r) -> tuple[int, ...]:
    """Expand an occupation list into the sorted list of particle modes.

    >>> mode_assignment((2, 0, 1))
    (0, 0, 2)
    """
    occ = as_occupation(r)
    return tuple(mode for mode, count in enumerate(occ) for _ in range(count))


def occupation_from_assignment(d, m: int) -> tuple[int, ...]:
    counts = [0] * m
    for mode in d:
        if not 0 <= mode < m:
            raise ValidationError(f"mode index {mode} outside 0..{m - 1}")
        counts[mode] += 1
    return tuple(counts)


def check_unitary(U, tol: float = UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionError(f"unitary must be square, got {U.shape}")
    err = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])), initial=0.0)
    if err > tol:
        raise ValidationError(f"matrix is not unitary: max |U^dag U - 1| = {err:.2e}")
    return U


def effective_matrix(U, r, s) -> np.ndarray:
    """Submatrix ``U[d(r), d(s)]`` with rows/columns repeated per occupation."""
    U = np.asarray(U, dtype=complex)
    r, s = as_occupation(r), as_occupation(s)
    m = U.shape[0]
    if len(r) != m or len(s) != m:
        raise DimensionError(f"occupation lengths {len(r)}, {len(s)} do not match m={m}")
    if sum(r) != sum(s):
        raise ValidationError(f"particle number mismatch: input has {sum(r)}, output {sum(s)}")
    return U[np.ix_(mode_assignment(r), mode_assignment(s))]


def fourier_unitary(m: int, one_based: bool = True) -> np.ndarray:
    """``U[j, k] = exp(2 pi i j k / m) / sqrt(m)`` with ``j, k`` counted from 1.

    ``one_based=False`` counts from 0 instead; the two differ only by row and
    column phases, which no event probability can see.
    """
    if m < 1:
        raise ValidationError("m must be >= 1")
    idx = np.arange(1, m + 1) if one_based else np.arange(m)
    return np.exp(2j * np.pi * np.outer(idx, idx) / m) / np.sqrt(m)


def make_rng(seed, *stream) -> np.random.Generator:
    """PCG64 generator for ``seed``; extra integers select an independent child stream.

    ``make_rng(seed, experiment, repetition)`` is the stream-splitting rule
    used by every sweep, so a cell can be recomputed in isolation.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.PCG64(ss))


def haar_random_unitary(m: int, seed) -> np.ndarray:
    """Haar-distributed unitary: complex Ginibre matrix, QR, diagonal phases moved into Q."""
    if m < 1:
        raise ValidationError("m must be >= 1")
    rng = make_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def event_count(m: int, n: int, collision_free: bool = False) -> int:
    return math.comb(m, n) if collision_free else math.comb(m + n - 1, n)


def enumerate_events(m: int, n: int, collision_free: bool = False) -> list[tuple[int, ...]]:
    """All output occupations of ``n`` particles in ``m`` modes, lexicographically descending.

    The order matches reading occupation tuples as numbers, most populated
    first mode leading: for ``m = n = 2`` it is ``(2,0), (1,1), (0,2)``.
    """
    size = event_count(m, n, collision_free)
    if size > MAX_EVENTS:
        raise CapacityError(f"{size} events for m={m}, n={n} exceeds {MAX_EVENTS}")
    source = combinations(range(m), n) if collision_free else combinations_with_replacement(range(m), n)
    return [occupation_from_assignment(d, m) for d in source]


def random_event(m: int, n: int, rng: np.random.Generator, collision_free: bool = False):
    """One event drawn uniformly from the event set."""
    if collision_free:
        modes = sorted(rng.choice(m, size=n, replace=False).tolist())
        return occupation_from_assignment(modes, m)
    # stars and bars: uniform over multisets
    bars = sorted(rng.choice(m + n - 1, size=n, replace=False).tolist())
    modes = [b - i for i, b in enumerate(bars)]
    return occupation_from_assignment(modes, m)


def normalization_factor(r, s) -> float:
    """``1 / (prod_j r_j! * prod_j s_j!)``."""
    r, s = as_occupation(r), as_occupation(s)
    denom = 1
    for v in (*r, *s):
        denom *= math.factorial(v)
    return 1.0 / denom


def bunching_event(m: int, n: int, mode: int = 0) -> tuple[int, ...]:
    occ = [0] * m
    occ[mode] = n
    return tuple(occ)


def cyclic_input(n: int, m: int) -> tuple[int, ...]:
    """One particle every ``m // n`` modes starting at the first mode."""
    if m % n:
        raise ValidationError(f"cyclic input needs n | m, got n={n}, m={m}")
    step = m // n
    return tuple(1 if j % step == 0 else 0 for j in range(m))
