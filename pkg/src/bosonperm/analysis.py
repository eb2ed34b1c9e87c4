"""Distribution-level comparisons and the distinguishability-transition experiments.

Total variation distances use the unhalved 1-norm, so they range over
``[0, 2]``. Cells evaluated on a uniform sample of events report the
sampled 1-norm scaled by ``#events / #sampled``, an unbiased estimate of the
full sum. Sweep cells draw their randomness from ``make_rng(seed,
experiment, ...)`` child streams and can be recomputed one at a time.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from .distinguishability import canonical_family, gram_matrix, random_states
from .errors import CapacityError, NumericalConsistencyError, ValidationError
from .permanent import permanent
from .probability import (
    ExchangeTable,
    ScatteringInstance,
    prob_dist,
    prob_id,
    prob_mixed,
    prob_partial,
    reference_probabilities,
)
from .scattering import (
    bunching_event,
    cyclic_input,
    enumerate_events,
    event_count,
    fourier_unitary,
    haar_random_unitary,
    make_rng,
    random_event,
)

# experiment ids for child RNG streams
TRANSITION, RANDOM_SCAN, HAAR_REFERENCE, ZERO_SEARCH = 1, 2, 4, 5

# complete enumeration when events * n! stays below this many exchange permanents
AUTO_COMPLETE_BUDGET = 2_000_000
DEFAULT_SAMPLED = 100
# events per Haar baseline network in the Fourier scan
BASELINE_SAMPLED = 300


@dataclass(frozen=True)
class EventDistribution:
    events: tuple
    probabilities: np.ndarray
    coverage: str = "complete"

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.events),):
            raise ValidationError("need one probability per event")
        if np.any(p < 0):
            raise ValidationError("probabilities must be non-negative")
        if self.coverage not in ("complete", "sampled"):
            raise ValidationError(f"unknown coverage tag {self.coverage!r}")
        if self.coverage == "complete" and abs(p.sum() - 1.0) > 1e-8:
            raise NumericalConsistencyError(f"complete distribution sums to {p.sum():.12g}")
        object.__setattr__(self, "events", tuple(tuple(e) for e in self.events))
        object.__setattr__(self, "probabilities", p)

    def as_dict(self) -> dict:
        return dict(zip(self.events, self.probabilities.tolist()))


def distribution(inst: ScatteringInstance, events=None, kind: str = "partial") -> EventDistribution:
    """Probabilities of ``events`` (all events if ``None``) under ``inst``.

    ``kind`` selects the particles' internal description: ``partial`` uses
    the instance, ``id`` identical bosons, ``dist`` distinguishable particles.
    """
    full = enumerate_events(inst.m, inst.n)
    if events is None:
        events = full
    events = [tuple(e) for e in events]
    complete = len(events) == len(full) and set(events) == set(full)
    if kind == "partial":
        if inst.is_mixed:
            values = [prob_mixed(inst, e).value for e in events]
        else:
            values = [prob_partial(inst, e).value for e in events]
    elif kind == "id":
        values = [prob_id(inst, e).value for e in events]
    elif kind == "dist":
        values = [prob_dist(inst, e).value for e in events]
    else:
        raise ValidationError(f"unknown distribution kind {kind!r}")
    return EventDistribution(tuple(events), np.array(values), "complete" if complete else "sampled")


def _values(p):
    return p.probabilities if isinstance(p, EventDistribution) else np.asarray(p, dtype=float)


def total_variation(p, q) -> float:
    """``sum_s |p(s) - q(s)|`` over a shared event list (no factor 1/2)."""
    if isinstance(p, EventDistribution) and isinstance(q, EventDistribution) and p.events != q.events:
        raise ValidationError("distributions are defined on different event lists")
    a, b = _values(p), _values(q)
    if a.shape != b.shape:
        raise ValidationError(f"event lists differ in length: {a.size} vs {b.size}")
    return float(np.sum(np.abs(a - b)))


@dataclass(frozen=True)
class MixtureFit:
    gamma_best: float
    delta: float
    degenerate: bool = False


def mixture_objective(p_id, p_dist, p_s, gamma) -> float:
    a, b, c = _values(p_id), _values(p_dist), _values(p_s)
    return float(np.sum(np.abs((1 - gamma) * a + gamma * b - c)))


def best_mixture(p_id, p_dist, p_s) -> MixtureFit:
    """Closest point of the line ``(1 - gamma) P_id + gamma P_dist`` to ``P_S`` in 1-norm.

    The objective is ``sum_s |b_s - a_s| |gamma - gamma_s| + const`` with
    breakpoints ``gamma_s``, so its smallest minimizer is the weighted median
    of the breakpoints. ``gamma`` ranges over all reals.
    """
    a, b, c = _values(p_id), _values(p_dist), _values(p_s)
    slope = b - a
    live = slope != 0
    if not np.any(live):
        return MixtureFit(float("nan"), total_variation(a, c), degenerate=True)
    gammas = (c[live] - a[live]) / slope[live]
    weights = np.abs(slope[live])
    order = np.argsort(gammas, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    # the left end of the minimizing interval is the first breakpoint where the
    # weight to its left reaches half; neighbouring breakpoints guard round-off
    cands = gammas[order[max(0, k - 1):k + 2]]
    vals = [mixture_objective(a, b, c, g) for g in cands]
    best = min(range(len(cands)), key=lambda i: (vals[i], cands[i]))
    return MixtureFit(float(cands[best]), float(vals[best]))


@dataclass(frozen=True)
class BoundReport:
    kind: str
    lhs: float
    rhs: float
    applicable: bool
    holds: Optional[bool]
    reason: str = ""


BOUND_KINDS = ("nonnegative", "absolute", "real")


def bound_check(inst: ScatteringInstance, s, kind: str, S=None) -> BoundReport:
    """Deviation bound for one event.

    ``nonnegative``: ``|P_dist - P_S| <= P_dist (perm S - 1)`` for entrywise
    non-negative S; ``absolute``: same with ``perm |S|`` for any S;
    ``real``: ``|P_id - P_S| <= P_dist (n! - perm S)`` for real S.
    """
    if kind not in BOUND_KINDS:
        raise ValidationError(f"unknown bound kind {kind!r}; choose from {BOUND_KINDS}")
    if S is not None:
        inst = inst.with_internal(S)
    S = inst.distinguishability()
    n = inst.n
    p_s = prob_partial(inst, s).value
    p_dist = prob_dist(inst, s).value
    reason = ""
    if max(inst.occupation) > 1:
        reason = "bounds are stated for single-occupancy inputs"
    elif kind == "nonnegative" and (np.any(np.abs(S.imag) > 0) or np.any(S.real < 0)):
        reason = "S has entries that are not real and non-negative"
    elif kind == "real" and np.any(np.abs(S.imag) > 0):
        reason = "S is not real"
    if kind == "real":
        lhs = abs(prob_id(inst, s).value - p_s)
        rhs = p_dist * (math.factorial(n) - permanent(S).real)
    else:
        lhs = abs(p_dist - p_s)
        base = S if kind == "nonnegative" else np.abs(S)
        rhs = p_dist * (permanent(base).real - 1.0)
    if reason:
        return BoundReport(kind, lhs, rhs, False, None, reason)
    return BoundReport(kind, lhs, rhs, True, bool(lhs <= rhs + 1e-10))


def bunching_ratio(inst: ScatteringInstance, mode: int = 0) -> float:
    """``P_S / P_dist`` for all particles leaving through output ``mode``."""
    s = bunching_event(inst.m, inst.n, mode)
    p_dist = prob_dist(inst, s).value
    if p_dist == 0.0:
        raise ValidationError(f"distinguishable bunching probability into mode {mode} is zero")
    return prob_partial(inst, s).value / p_dist


def sample_events(dist: EventDistribution, count: int, seed) -> list:
    """I.i.d. events by inverse-CDF sampling of a complete distribution."""
    if dist.coverage != "complete":
        raise ValidationError("sampling needs a complete distribution")
    p = dist.probabilities
    cdf = np.cumsum(p) / p.sum()
    last = int(np.flatnonzero(p > 0)[-1])
    u = make_rng(seed).random(int(count))
    idx = np.minimum(np.searchsorted(cdf, u, side="right"), last)
    return [dist.events[i] for i in idx]


def choose_events(m: int, n: int, policy, rng) -> tuple[list, str]:
    """Event list for a sweep cell: ``complete``, ``sampled:k`` or ``auto``."""
    policy = policy or "auto"
    if policy == "auto":
        total = event_count(m, n)
        if total * math.factorial(n) <= AUTO_COMPLETE_BUDGET:
            return enumerate_events(m, n), "complete"
        policy = f"sampled:{DEFAULT_SAMPLED}"
    if policy == "complete":
        return enumerate_events(m, n), "complete"
    if isinstance(policy, str) and policy.startswith("sampled:"):
        k = int(policy.split(":", 1)[1])
        total = event_count(m, n)
        if k >= total:
            return enumerate_events(m, n), "complete"
        chosen, seen = [], set()
        while len(chosen) < k:
            e = random_event(m, n, rng)
            if e not in seen:
                seen.add(e)
                chosen.append(e)
        return chosen, "sampled"
    raise ValidationError(f"unknown event policy {policy!r}")


@dataclass
class SweepRecord:
    experiment: str
    n: int
    m: int
    seed: int
    repetition: int
    network: str
    x: Optional[float] = None
    D: Optional[int] = None
    perm_S: Optional[float] = None
    norm_perm: Optional[float] = None
    d_id: Optional[float] = None
    d_dist: Optional[float] = None
    d_id_dist: Optional[float] = None
    gamma_best: Optional[float] = None
    delta: Optional[float] = None
    suppressed_fraction: Optional[float] = None
    coverage: str = "complete"
    n_events: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


FIELDS = tuple(SweepRecord.__dataclass_fields__)


def _normalized_perm(p: float, n: int) -> float:
    return math.log(p) / math.log(math.factorial(n)) if n > 1 else 0.0


def estimate_scale(m: int, n: int, k: int, coverage: str) -> float:
    """Factor turning a 1-norm summed over ``k`` uniformly sampled events into
    an unbiased estimate of the full 1-norm (1 for complete coverage)."""
    return 1.0 if coverage == "complete" else event_count(m, n) / k


def _compare(table: ExchangeTable, S, p_id, p_dist, scale: float = 1.0) -> dict:
    p_s = table.probabilities(S)
    fit = best_mixture(p_id, p_dist, p_s)
    perm_s = permanent(S).real
    return dict(
        perm_S=perm_s,
        norm_perm=_normalized_perm(perm_s, table.n),
        d_id=scale * total_variation(p_id, p_s),
        d_dist=scale * total_variation(p_dist, p_s),
        d_id_dist=scale * total_variation(p_id, p_dist),
        gamma_best=fit.gamma_best,
        delta=scale * fit.delta,
    )


def _check_n(n, low, high):
    if not low <= n <= high:
        raise CapacityError(f"n={n} outside supported range {low}..{high}")


def transition_sweep(n: int, repetitions: int, x_grid=15, seed: int = 0, m: Optional[int] = None,
                     events="auto") -> list[SweepRecord]:
    """Equal-overlap family ``S_jk = x`` on Haar networks, one row per (repetition, x)."""
    _check_n(n, 2, 7)
    m = 2 * n if m is None else m
    xs = np.linspace(0.0, 1.0, x_grid) if np.isscalar(x_grid) else np.asarray(x_grid, dtype=float)
    r = tuple([1] * n + [0] * (m - n))
    records = []
    for rep in range(repetitions):
        U = haar_random_unitary(m, make_rng(seed, TRANSITION, rep, 0))
        evs, coverage = choose_events(m, n, events, make_rng(seed, TRANSITION, rep, 1))
        table = ExchangeTable(U, r, evs)
        p_id, p_dist = table.identical(), table.distinguishable()
        scale = estimate_scale(m, n, len(evs), coverage)
        for x in xs:
            S, _ = canonical_family(n, float(x))
            records.append(SweepRecord("sweep-transition", n, m, seed, rep, "haar", x=float(x),
                                       coverage=coverage, n_events=len(evs), **_compare(table, S, p_id, p_dist, scale)))
    return records


def random_scan(n: int, draws: int, dims=None, seed: int = 0, m: Optional[int] = None,
                unitary=None, events="auto") -> list[SweepRecord]:
    """Uniformly random internal states in ``D`` dimensions on one fixed network.

    ``draws`` is per dimension. The network is Haar random from the
    ``seed`` stream unless ``unitary`` is given.
    """
    _check_n(n, 2, 7)
    m = 2 * n if m is None else m
    dims = list(range(2, n + 1)) if dims is None else [int(d) for d in dims]
    r = tuple([1] * n + [0] * (m - n))
    U = haar_random_unitary(m, make_rng(seed, RANDOM_SCAN, 0)) if unitary is None else np.asarray(unitary)
    network = "haar" if unitary is None else "explicit"
    evs, coverage = choose_events(m, n, events, make_rng(seed, RANDOM_SCAN, 1))
    table = ExchangeTable(U, r, evs)
    p_id, p_dist = table.identical(), table.distinguishable()
    scale = estimate_scale(m, n, len(evs), coverage)
    records = []
    for D in dims:
        for k in range(draws):
            S = gram_matrix(random_states(n, D, make_rng(seed, RANDOM_SCAN, 2, D, k)))
            records.append(SweepRecord("scan-random", n, m, seed, k, network, D=D, coverage=coverage,
                                       n_events=len(evs), **_compare(table, S, p_id, p_dist, scale)))
    return records


def haar_id_dist_distances(n: int, count: int, seed: int = 0, m: Optional[int] = None,
                           events="complete") -> list[SweepRecord]:
    """``d(P_id, P_dist)`` for ``count`` Haar networks, single-occupancy input."""
    m = 2 * n if m is None else m
    r = tuple([1] * n + [0] * (m - n))
    out = []
    for rep in range(count):
        U = haar_random_unitary(m, make_rng(seed, HAAR_REFERENCE, n, m, rep))
        evs, coverage = choose_events(m, n, events, make_rng(seed, HAAR_REFERENCE, n, m, rep, 1))
        p_id, p_dist = reference_probabilities(U, r, evs)
        out.append(SweepRecord("haar-reference", n, m, seed, rep, "haar", coverage=coverage,
                               n_events=len(evs),
                               d_id_dist=estimate_scale(m, n, len(evs), coverage) * total_variation(p_id, p_dist)))
    return out


def fourier_scan(ns, baseline_repetitions: int = 20, seed: int = 0, baseline_events="auto",
                 baseline_m=None) -> list[SweepRecord]:
    """Fourier network with cyclic input (``m = 2n``) against Haar baselines.

    For each ``n`` the first record is the Fourier network (complete
    enumeration), followed by ``baseline_repetitions`` Haar networks of
    dimension ``n**2`` (or ``baseline_m(n)``).
    """
    records = []
    for n in ns:
        _check_n(n, 2, 7)
        m = 2 * n
        r = cyclic_input(n, m)
        evs = enumerate_events(m, n)
        p_id, p_dist = reference_probabilities(fourier_unitary(m), r, evs)
        suppressed = float(np.mean(p_id < 1e-12))
        records.append(SweepRecord("scan-fourier", n, m, seed, 0, "fourier", d_id_dist=total_variation(p_id, p_dist),
                                   suppressed_fraction=suppressed, coverage="complete", n_events=len(evs)))
        mb = n * n if baseline_m is None else int(baseline_m(n) if callable(baseline_m) else baseline_m)
        for rec in haar_id_dist_distances(n, baseline_repetitions, seed, mb, _baseline_policy(baseline_events, mb, n)):
            rec.experiment = "scan-fourier"
            records.append(rec)
    return records


def _baseline_policy(policy, m, n):
    if policy != "auto":
        return policy
    return "complete" if event_count(m, n) <= BASELINE_SAMPLED else f"sampled:{BASELINE_SAMPLED}"


def interference_sums(unitary, occupation) -> dict:
    """``sum_s N_s perm(M_s * conj(M_s[sigma]))`` over all events, for every ``sigma``."""
    occupation = tuple(occupation)
    n, m = sum(occupation), len(occupation)
    table = ExchangeTable(unitary, occupation, enumerate_events(m, n))
    sums = table.table.sum(axis=0)
    return {tuple(int(v) for v in sigma): complex(val) for sigma, val in zip(table.perms, sums)}


@dataclass
class ZeroSearchReport:
    instances: int
    violations: list = field(default_factory=list)


def zero_probability_search(n: int, unitaries: int, states_per_unitary: int, seed: int = 0,
                            m: Optional[int] = None) -> ZeroSearchReport:
    """Look for events suppressed for partially distinguishable particles but not for bosons.

    Every (network, state set, event) triple counts as one instance.
    """
    m = 2 * n if m is None else m
    r = tuple([1] * n + [0] * (m - n))
    evs = enumerate_events(m, n)
    report = ZeroSearchReport(0)
    for u in range(unitaries):
        U = haar_random_unitary(m, make_rng(seed, ZERO_SEARCH, u))
        table = ExchangeTable(U, r, evs)
        p_id = table.identical()
        for k in range(states_per_unitary):
            rng = make_rng(seed, ZERO_SEARCH, u, k)
            D = int(rng.integers(1, n + 1))
            S = gram_matrix(random_states(n, D, rng))
            p_s = table.probabilities(S)
            hits = np.flatnonzero((p_s < 1e-12) & (p_id > 1e-6))
            report.violations.extend((u, k, evs[i]) for i in hits)
            report.instances += len(evs)
    return report


def spearman(a, b) -> float:
    return float(spearmanr(a, b).statistic)

