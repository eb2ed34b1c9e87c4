"""Event probabilities for (partially) distinguishable bosons.

A :class:`ScatteringInstance` fixes the network, the input occupation and
the particles' internal states. Every probability here includes the
``1 / (prod r! prod s!)`` factor that compensates for repeated rows and
columns of the effective matrix.

Particles that share an input mode are identical by construction, so the
"distinguishable" reference keeps them mutually indistinguishable and only
separates particles from different input modes. For single-occupancy inputs
this is the familiar ``perm(|M|^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Union

import numpy as np

from .distinguishability import (
    InternalStateSet,
    MixedEnsemble,
    check_distinguishability,
    gram_matrix,
    gram_schmidt,
    j_table,
)
from .errors import CapacityError, NumericalConsistencyError, ValidationError
from .permanent import (
    all_permutations,
    exchange_weight,
    permanent,
    permanents,
    permuted_hadamard_permanent,
    tensor_probability_bruteforce,
    tensor_probability_ryser,
)
from .scattering import (
    as_occupation,
    check_unitary,
    effective_matrix,
    mode_assignment,
    normalization_factor,
)

PROB_TOL = 1e-9
MAX_ORTHO_N = 5
MAX_MIXED_J_N = 6
MAX_EXCHANGE_N = 7

Internal = Union[InternalStateSet, MixedEnsemble, np.ndarray]


def _expand_rows(values: np.ndarray, r, what: str) -> np.ndarray:
    """Repeat per-mode data to per-particle data, or accept per-particle data as is."""
    d = mode_assignment(r)
    n = len(d)
    occupied = [j for j, c in enumerate(r) if c]
    if values.shape[0] == n:
        return values
    if values.shape[0] == len(occupied):
        index = [occupied.index(mode) for mode in d]
        return values[index]
    raise ValidationError(
        f"{what} has {values.shape[0]} entries; expected {n} particles or {len(occupied)} occupied modes"
    )


def _same_mode_blocks(r) -> np.ndarray:
    d = np.array(mode_assignment(r))
    return d[:, None] == d[None, :]


@dataclass(frozen=True)
class ScatteringInstance:
    """Network ``unitary``, input ``occupation`` and particle ``internal`` description.

    ``internal`` is an :class:`InternalStateSet`, a :class:`MixedEnsemble` or
    a distinguishability matrix; per-occupied-mode data is expanded to one
    entry per particle.
    """

    unitary: np.ndarray
    occupation: tuple
    internal: Internal

    def __post_init__(self):
        U = check_unitary(self.unitary)
        r = as_occupation(self.occupation)
        if len(r) != U.shape[0]:
            raise ValidationError(f"input occupation has {len(r)} modes, unitary has {U.shape[0]}")
        if sum(r) < 1:
            raise ValidationError("input occupation holds no particles")
        internal = self.internal
        if isinstance(internal, InternalStateSet):
            internal = InternalStateSet(_expand_rows(internal.vectors, r, "state set"))
        elif isinstance(internal, MixedEnsemble):
            if internal.n != sum(r):
                sets = tuple(InternalStateSet(_expand_rows(s.vectors, r, "ensemble")) for s in internal.realizations)
                internal = MixedEnsemble(internal.weights, sets, internal.kind, internal.factors)
        else:
            S = np.asarray(internal, dtype=complex)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise ValidationError(f"distinguishability matrix must be square, got {S.shape}")
            S = _expand_rows(S, r, "distinguishability matrix")
            S = _expand_rows(S.T, r, "distinguishability matrix").T.copy()
            internal = check_distinguishability(S)
        object.__setattr__(self, "unitary", U)
        object.__setattr__(self, "occupation", r)
        object.__setattr__(self, "internal", internal)
        if not self.is_mixed:
            S = self.distinguishability()
            same = _same_mode_blocks(r)
            if np.max(np.abs(S[same] - 1.0), initial=0.0) > 1e-12:
                raise ValidationError("particles sharing an input mode must have identical internal states")

    @property
    def m(self) -> int:
        return self.unitary.shape[0]

    @property
    def n(self) -> int:
        return sum(self.occupation)

    @property
    def is_mixed(self) -> bool:
        return isinstance(self.internal, MixedEnsemble)

    def distinguishability(self) -> np.ndarray:
        if self.is_mixed:
            raise ValidationError("mixed ensemble has no single distinguishability matrix")
        if isinstance(self.internal, InternalStateSet):
            return gram_matrix(self.internal)
        return self.internal

    def with_internal(self, internal) -> "ScatteringInstance":
        return ScatteringInstance(self.unitary, self.occupation, internal)

    def effective(self, s) -> np.ndarray:
        return effective_matrix(self.unitary, self.occupation, s)

    def normalization(self, s) -> float:
        return normalization_factor(self.occupation, s)

    def identical_reference(self) -> np.ndarray:
        return np.ones((self.n, self.n), dtype=complex)

    def distinguishable_reference(self) -> np.ndarray:
        return _same_mode_blocks(self.occupation).astype(complex)


@dataclass(frozen=True)
class EventProbability:
    event: tuple
    value: float
    method: str


def _finish(value: float) -> float:
    if value > 1 + PROB_TOL:
        raise NumericalConsistencyError(f"probability {value!r} exceeds 1")
    return min(max(value, 0.0), 1.0)


def _check_event(inst: ScatteringInstance, s) -> tuple:
    s = as_occupation(s)
    if len(s) != inst.m:
        raise ValidationError(f"event has {len(s)} modes, network has {inst.m}")
    if sum(s) != inst.n:
        raise ValidationError(f"event holds {sum(s)} particles, input holds {inst.n}")
    return s


def prob_partial(inst: ScatteringInstance, s, method: str = "ryser", workers: int = 1) -> EventProbability:
    """Probability of output ``s`` for pure internal states (tensor permanent)."""
    if inst.is_mixed:
        raise ValidationError("mixed ensemble given; use prob_mixed")
    s = _check_event(inst, s)
    M = inst.effective(s)
    S = inst.distinguishability()
    if method == "ryser":
        raw = tensor_probability_ryser(M, S, workers=workers)
    elif method == "bruteforce":
        raw = tensor_probability_bruteforce(M, S)
    else:
        raise ValidationError(f"unknown method {method!r}")
    return EventProbability(s, _finish(inst.normalization(s) * raw), method)


def prob_id(inst: ScatteringInstance, s) -> EventProbability:
    """Identical bosons: ``N |perm(M)|^2``."""
    s = _check_event(inst, s)
    value = inst.normalization(s) * abs(permanent(inst.effective(s))) ** 2
    return EventProbability(s, _finish(value), "ryser")


def prob_dist(inst: ScatteringInstance, s) -> EventProbability:
    """Distinguishable reference: ``N * prod r! * perm(|M|^2)``."""
    s = _check_event(inst, s)
    M = inst.effective(s)
    same_mode = math.prod(math.factorial(c) for c in inst.occupation)
    value = inst.normalization(s) * same_mode * permanent(np.abs(M) ** 2).real
    return EventProbability(s, _finish(value), "ryser")


def _amplitude_products(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    perms = all_permutations(n)
    return np.prod(M[perms, np.arange(n)], axis=1)


def prob_mixed(inst: ScatteringInstance, s, path: str = "ensemble") -> EventProbability:
    """Mixed internal states.

    ``path="ensemble"`` averages pure-state probabilities over realizations;
    ``path="j"`` contracts the ensemble-averaged overlap table ``J(sigma, rho)``
    with amplitude products directly.
    """
    s = _check_event(inst, s)
    if inst.is_mixed:
        ensemble = inst.internal
    elif isinstance(inst.internal, InternalStateSet):
        ensemble = MixedEnsemble.pure(inst.internal)
    else:
        return EventProbability(s, prob_partial(inst, s).value, "mixed")
    M = inst.effective(s)
    N = inst.normalization(s)
    if path == "ensemble":
        value = 0.0
        for w, S in zip(ensemble.weights, ensemble.gram_matrices()):
            value += w * tensor_probability_ryser(M, S)
    elif path == "j":
        n = M.shape[0]
        if n > MAX_MIXED_J_N:
            raise CapacityError(f"J path: n={n} exceeds guard {MAX_MIXED_J_N} ({math.factorial(n)}**2 pairs)")
        J = j_table(ensemble, all_permutations(n))
        amp = _amplitude_products(M)
        total = amp @ J @ amp.conj()
        value = total.real
    else:
        raise ValidationError(f"unknown path {path!r}")
    return EventProbability(s, _finish(N * value), "mixed")


def prob_via_orthonormalization(inst: ScatteringInstance, s, order=None) -> EventProbability:
    """Probability from the Gram-Schmidt expansion of the internal states.

    Each particle is written in an orthonormal internal basis; the amplitude
    for output mode ``l`` to hold internal basis state ``kappa_l`` is
    ``perm(M[i, l] * c[i, kappa_l])``, and the event probability sums the
    squared moduli over all internal configurations ``kappa``. Components of
    the initial state that lead to the same ``kappa`` interfere inside that
    permanent. Only collision-free outputs are supported.
    """
    if inst.is_mixed:
        raise ValidationError("orthonormalization path needs pure internal states")
    s = _check_event(inst, s)
    if max(s) > 1:
        raise ValidationError("orthonormalization path supports collision-free outputs only")
    n = inst.n
    if n > MAX_ORTHO_N:
        raise CapacityError(f"orthonormalization: n={n} exceeds guard {MAX_ORTHO_N}")
    states = inst.internal
    if not isinstance(states, InternalStateSet):
        states = _states_from_gram(inst.distinguishability())
    c = gram_schmidt(states, order).coefficients_by_particle()
    k = c.shape[1]
    M = inst.effective(s)
    configs = np.array(list(product(range(k), repeat=n)), dtype=np.intp)
    # B[kappa, i, l] = M[i, l] * c[i, kappa_l]
    B = M[None, :, :] * c[:, configs].transpose(1, 0, 2)
    total = float(np.sum(np.abs(permanents(B)) ** 2))
    same_mode = math.prod(math.factorial(v) for v in inst.occupation)
    return EventProbability(s, _finish(total / same_mode), "orthonormalization")


def _states_from_gram(S: np.ndarray) -> InternalStateSet:
    """A vector realization of ``S`` (rows of a square-root factor)."""
    w, V = np.linalg.eigh((S + S.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    keep = w > 1e-14
    vecs = (V[:, keep] * np.sqrt(w[keep])).conj()
    return InternalStateSet.normalized(vecs)


def exchange_decomposition(inst: ScatteringInstance, s):
    """Per-permutation terms ``(sigma, prod_j S[sigma_j, j], perm(M * conj(M[sigma])))``.

    The weighted permanents sum to the probability without the
    normalization factor; ``sigma`` equal to the identity carries the
    distinguishable-particle term.
    """
    s = _check_event(inst, s)
    n = inst.n
    if n > MAX_EXCHANGE_N:
        raise CapacityError(f"exchange decomposition: n={n} exceeds guard {MAX_EXCHANGE_N}")
    M = inst.effective(s)
    S = inst.distinguishability()
    return [
        (tuple(int(v) for v in sigma), exchange_weight(S, sigma), permuted_hadamard_permanent(M, sigma))
        for sigma in all_permutations(n)
    ]


class ExchangeTable:
    """Precomputed exchange permanents for a fixed network, input and event list.

    ``table[e, a] = N_e * perm(M_e * conj(M_e[perms[a]]))``; the probability
    of every event for any pure distinguishability matrix is then one
    matrix-vector product with the overlap weights ``prod_j S[sigma_j, j]``.
    Sweeps over many ``S`` for one network reuse the table.
    """

    def __init__(self, unitary, occupation, events):
        self.unitary = check_unitary(unitary)
        self.occupation = as_occupation(occupation)
        self.events = [as_occupation(e) for e in events]
        n = sum(self.occupation)
        if n > MAX_EXCHANGE_N:
            raise CapacityError(f"exchange table: n={n} exceeds guard {MAX_EXCHANGE_N}")
        self.n = n
        self.perms = all_permutations(n)
        rows = list(mode_assignment(self.occupation))
        norms = np.array([normalization_factor(self.occupation, e) for e in self.events])
        self.table = np.empty((len(self.events), len(self.perms)), dtype=complex)
        block = max(1, 200_000 // len(self.perms))
        for e0 in range(0, len(self.events), block):
            evs = self.events[e0:e0 + block]
            cols = np.array([mode_assignment(e) for e in evs], dtype=np.intp)
            Ms = self.unitary[rows][:, cols].transpose(1, 0, 2)
            A = Ms[:, None, :, :] * Ms[:, self.perms, :].conj()
            vals = permanents(A.reshape(-1, n, n)).reshape(len(evs), len(self.perms))
            self.table[e0:e0 + len(evs)] = norms[e0:e0 + block, None] * vals

    def weights(self, S) -> np.ndarray:
        S = np.asarray(S, dtype=complex)
        return np.prod(S[self.perms, np.arange(self.n)], axis=1)

    def probabilities(self, S) -> np.ndarray:
        values = (self.table @ self.weights(S)).real
        if values.min(initial=0.0) < -1e-10:
            raise NumericalConsistencyError(f"negative probability {values.min():.3e}")
        return np.clip(values, 0.0, 1.0)

    def identical(self) -> np.ndarray:
        return self.probabilities(np.ones((self.n, self.n)))

    def distinguishable(self) -> np.ndarray:
        return self.probabilities(_same_mode_blocks(self.occupation).astype(float))


def reference_probabilities(unitary, occupation, events):
    """Identical-boson and distinguishable-particle probabilities for many events.

    Uses batched permanents of ``M`` and ``|M|^2`` directly.
    """
    U = np.asarray(unitary, dtype=complex)
    r = as_occupation(occupation)
    rows = list(mode_assignment(r))
    n = len(rows)
    same_mode = math.prod(math.factorial(c) for c in r)
    p_id = np.empty(len(events))
    p_dist = np.empty(len(events))
    block = max(1, 400_000 // max(1, n * n))
    for e0 in range(0, len(events), block):
        evs = [as_occupation(e) for e in events[e0:e0 + block]]
        cols = np.array([mode_assignment(e) for e in evs], dtype=np.intp)
        Ms = U[rows][:, cols].transpose(1, 0, 2)
        norms = np.array([normalization_factor(r, e) for e in evs])
        p_id[e0:e0 + len(evs)] = norms * np.abs(permanents(Ms)) ** 2
        p_dist[e0:e0 + len(evs)] = norms * same_mode * permanents(np.abs(Ms) ** 2).real
    return np.clip(p_id, 0.0, 1.0), np.clip(p_dist, 0.0, 1.0)
