"""Permanent-type sums.

Matrix permanents (Ryser/Gray-code and the n! definition), the three-index
tensor ``W`` built from an effective scattering matrix and a
distinguishability matrix, and the event weight of partially
distinguishable bosons evaluated either by the double sum over permutation
pairs or by inclusion-exclusion over pairs of row subsets.

All routines take plain ``numpy`` arrays. Permutations are 0-based index
arrays; ``sigma[j]`` is the image of ``j``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import CapacityError, DimensionError, NumericalConsistencyError

MAX_RYSER_N = 30
MAX_NAIVE_N = 9
MAX_BRUTEFORCE_N = 7
MAX_TENSOR_RYSER_N = 14

IMAG_TOL = 1e-10
NEG_TOL = 1e-10

# Gray-code steps processed per block; bounds memory at 2**16 * n entries.
_BLOCK = 1 << 16


def _square(M, name="matrix"):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DimensionError(f"{name} contains NaN or Inf")
    return M


def _check_pair(M, S):
    M = _square(M, "M")
    S = _square(S, "S")
    if M.shape != S.shape:
        raise DimensionError(f"M is {M.shape} but S is {S.shape}")
    return M, S


@lru_cache(maxsize=None)
def all_permutations(n: int) -> np.ndarray:
    """All n! permutations of ``range(n)`` as an ``(n!, n)`` int array, lexicographic."""
    if n == 0:
        return np.zeros((1, 0), dtype=np.intp)
    out = np.array(list(permutations(range(n))), dtype=np.intp)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _gray_steps(n: int):
    """Changed row and +/-1 direction for Gray-code steps 1 .. 2**n - 1.

    Also returns ``(-1)**popcount`` of the subset reached after each step.
    """
    k = np.arange(1, 1 << n, dtype=np.int64)
    gray = k ^ (k >> 1)
    bit = np.zeros_like(k)
    low = k & -k
    while True:
        more = low > 1
        if not more.any():
            break
        bit[more] += 1
        low[more] >>= 1
    direction = np.where((gray >> bit) & 1, 1.0, -1.0)
    pop = np.zeros_like(gray)
    g = gray.copy()
    while g.any():
        pop += g & 1
        g >>= 1
    parity = np.where(pop & 1, -1.0, 1.0)
    for a in (bit, direction, parity):
        a.setflags(write=False)
    return bit, direction, parity


@lru_cache(maxsize=None)
def subset_incidence(n: int) -> np.ndarray:
    """Row ``k`` is the 0/1 membership vector of the subset with bitmask ``k``."""
    k = np.arange(1 << n, dtype=np.int64)
    inc = ((k[:, None] >> np.arange(n)) & 1).astype(float)
    inc.setflags(write=False)
    return inc


def permanent(M) -> complex:
    """Permanent of a square matrix by Ryser's formula.

    Subsets of rows are visited in Gray-code order so that every step adds or
    removes one row from the running column sums: O(2**n * n) work.
    """
    M = _square(M)
    n = M.shape[0]
    if n > MAX_RYSER_N:
        raise CapacityError(f"permanent: n={n} exceeds guard {MAX_RYSER_N} (2**n subsets)")
    if n == 0:
        return 1.0 + 0j
    bit, direction, parity = _gray_steps(n)
    total = 0j
    running = np.zeros(n, dtype=complex)
    for start in range(0, bit.size, _BLOCK):
        sl = slice(start, start + _BLOCK)
        steps = direction[sl, None] * M[bit[sl], :]
        steps[0] += running
        sums = np.cumsum(steps, axis=0)
        running = sums[-1]
        total += np.dot(parity[sl], np.prod(sums, axis=1))
    return complex((-1) ** n * total)


def permanents(stack) -> np.ndarray:
    """Permanents of a stack of square matrices, shape ``(B, n, n)`` -> ``(B,)``.

    Same Gray-code recursion as :func:`permanent`, vectorised over the stack.
    """
    A = np.asarray(stack)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise DimensionError(f"expected (B, n, n) stack, got {A.shape}")
    B, n, _ = A.shape
    if n == 0:
        return np.ones(B, dtype=A.dtype if np.iscomplexobj(A) else float)
    if n > 20:
        raise CapacityError(f"batched permanents limited to n <= 20, got {n}")
    bit, direction, parity = _gray_steps(n)
    chunk = max(1, (1 << 22) // ((1 << n) * n))
    out = np.empty(B, dtype=np.result_type(A.dtype, float))
    for b0 in range(0, B, chunk):
        sub = A[b0:b0 + chunk]
        steps = direction[:, None, None] * sub[:, bit, :].transpose(1, 0, 2)
        sums = np.cumsum(steps, axis=0)
        out[b0:b0 + chunk] = (-1) ** n * np.einsum("k,kb->b", parity, np.prod(sums, axis=2))
    return out


def permanent_naive(M) -> complex:
    """Direct sum over all n! permutations (test oracle)."""
    M = _square(M)
    n = M.shape[0]
    if n > MAX_NAIVE_N:
        raise CapacityError(f"permanent_naive: n={n} exceeds guard {MAX_NAIVE_N} (n! terms)")
    perms = all_permutations(n)
    cols = np.arange(n)
    return complex(np.sum(np.prod(M[perms, cols], axis=1)))


def build_w_tensor(M, S) -> np.ndarray:
    """``W[k, l, j] = M[k, j] * conj(M[l, j]) * S[l, k]``.

    Conjugate symmetric in the first two indices whenever ``S`` is Hermitian.
    """
    M, S = _check_pair(M, S)
    return M[:, None, :] * M.conj()[None, :, :] * S.T[:, :, None]


def _real_probability(value: complex, scale: float = 1.0) -> float:
    tol = IMAG_TOL * max(1.0, scale)
    if abs(value.imag) > tol:
        raise NumericalConsistencyError(
            f"imaginary residue {value.imag:.3e} exceeds tolerance {tol:.1e}"
        )
    re = value.real
    if re < -tol:
        raise NumericalConsistencyError(f"negative probability {re:.3e}")
    return max(re, 0.0)


def tensor_probability_bruteforce(M, S) -> float:
    """Double sum over permutation pairs (sigma, rho).

    ``sum_{sigma,rho} prod_j M[sigma_j, j] conj(M[rho_j, j]) S[rho_j, sigma_j]``
    """
    M, S = _check_pair(M, S)
    n = M.shape[0]
    if n > MAX_BRUTEFORCE_N:
        raise CapacityError(
            f"bruteforce: n={n} exceeds guard {MAX_BRUTEFORCE_N} ({math.factorial(n)}**2 terms)"
        )
    perms = all_permutations(n)
    cols = np.arange(n)
    amp = np.prod(M[perms, cols], axis=1)
    total = 0j
    step = max(1, 200_000 // max(1, perms.shape[0]))
    for r0 in range(0, perms.shape[0], step):
        rho = perms[r0:r0 + step]
        # overlap[rho, sigma] = prod_j S[rho_j, sigma_j]
        overlap = np.prod(S[rho[:, None, :], perms[None, :, :]], axis=2)
        total += np.dot(amp[r0:r0 + step].conj(), overlap @ amp)
    scale = float(np.sum(np.abs(amp)) ** 2)
    return _real_probability(complex(total), scale)


def _ryser_chunk(M, S, positions):
    """Sum of Ryser pair terms for the Gray-code positions in ``positions``.

    Subsets ``Sset`` are visited in Gray order starting from a directly
    computed column-sum table; only partner subsets ``R <= Sset`` (as
    bitmask integers) are included, weighted 2 off the diagonal.
    """
    n = M.shape[0]
    start, stop = positions
    inc = subset_incidence(n)
    sign_r = np.where(inc.sum(axis=1) % 2, -1.0, 1.0)
    Mc = M.conj()
    k = np.arange(start, stop, dtype=np.int64)
    masks = k ^ (k >> 1)

    first = int(masks[0])
    members = [i for i in range(n) if first >> i & 1]
    # table[r, j] = sum_{s in Sset} S[r, s] M[s, j]
    table = S[:, members] @ M[members, :]
    prev = first
    total = 0.0
    for mask in masks:
        mask = int(mask)
        if mask != prev:
            changed = (mask ^ prev).bit_length() - 1
            if mask >> changed & 1:
                table = table + np.outer(S[:, changed], M[changed, :])
            else:
                table = table - np.outer(S[:, changed], M[changed, :])
            prev = mask
        if mask == 0:
            continue
        a = Mc * table
        col = inc[1:mask + 1] @ a
        prods = np.prod(col, axis=1).real
        weights = 2.0 * sign_r[1:mask + 1]
        weights[-1] *= 0.5
        total += sign_r[mask] * float(np.dot(weights, prods))
    return total


RYSER_CHUNKS = 64


def _balanced_positions(n: int, parts: int):
    """Split Gray positions 0 .. 2**n - 1 into ``parts`` runs of similar cost."""
    k = np.arange(1 << n, dtype=np.int64)
    cost = (k ^ (k >> 1)).astype(float) + 1.0
    cum = np.cumsum(cost)
    targets = cum[-1] * np.arange(1, parts) / parts
    cuts = [0, *np.searchsorted(cum, targets).tolist(), 1 << n]
    return [(a, b) for a, b in zip(cuts[:-1], cuts[1:]) if b > a]


def _pairwise_sum(values):
    values = list(values)
    if not values:
        return 0.0
    while len(values) > 1:
        nxt = [values[i] + values[i + 1] for i in range(0, len(values) - 1, 2)]
        if len(values) % 2:
            nxt.append(values[-1])
        values = nxt
    return values[0]


def tensor_probability_ryser(M, S, workers: int = 1) -> float:
    """Tensor permanent of ``W(M, S)`` by inclusion-exclusion over subset pairs.

    Uses the halved form: pairs ``(Sset, R)`` with ``Sset >= R`` as bitmask
    integers, weight ``2 - delta``, real part of the column products. With
    ``workers > 1`` the runs are evaluated in separate processes. The subset
    range is always split into the same ``RYSER_CHUNKS`` cost-balanced runs
    and reduced by a fixed pairwise tree sum, so the result is bit-identical
    for every worker count.
    """
    M, S = _check_pair(M, S)
    n = M.shape[0]
    if n > MAX_TENSOR_RYSER_N:
        raise CapacityError(
            f"tensor Ryser: n={n} exceeds guard {MAX_TENSOR_RYSER_N} (2**(2n) = {4 ** n} terms)"
        )
    if n == 0:
        return 1.0
    workers = max(1, int(workers))
    runs = _balanced_positions(n, RYSER_CHUNKS)
    if workers == 1 or len(runs) == 1:
        partials = [_ryser_chunk(M, S, run) for run in runs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_ryser_chunk, [M] * len(runs), [S] * len(runs), runs))
    total = _pairwise_sum(partials)
    scale = float(np.prod(np.sum(np.abs(M), axis=0))) ** 2
    return _real_probability(complex(total), scale)


def permuted_hadamard_permanent(M, sigma) -> complex:
    """``perm(A)`` with ``A[j, k] = M[j, k] * conj(M[sigma[j], k])``."""
    M = _square(M)
    sigma = np.asarray(sigma, dtype=np.intp)
    if sigma.shape != (M.shape[0],) or sorted(sigma.tolist()) != list(range(M.shape[0])):
        raise DimensionError(f"sigma must be a permutation of range({M.shape[0]})")
    return permanent(M * M[sigma, :].conj())


def exchange_weight(S, sigma) -> complex:
    """``prod_j S[sigma[j], j]``, the overlap factor paired with
    :func:`permuted_hadamard_permanent` in the exchange expansion."""
    S = np.asarray(S, dtype=complex)
    sigma = np.asarray(sigma, dtype=np.intp)
    return complex(np.prod(S[sigma, np.arange(S.shape[0])]))
