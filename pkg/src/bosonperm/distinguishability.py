"""Internal states of the particles and the overlaps between them.

A state set holds one unit vector per particle. Its Gram matrix
``S[j, k] = <phi_j | phi_k>`` (conjugate-linear in the first slot) is the
distinguishability matrix: the identity for fully distinguishable
particles, all ones for identical bosons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import CapacityError, DegeneracyError, DimensionError, ValidationError
from .permanent import permanent
from .scattering import make_rng

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
RANK_TOL = 1e-10
MAX_REALIZATIONS = 1_000_000


@dataclass(frozen=True)
class InternalStateSet:
    """``n`` unit vectors of dimension ``D`` stored as the rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.array(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionError(f"state set must be a non-empty (n, D) array, got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if bad.size:
            raise ValidationError(f"state {int(bad[0])} has norm {norms[bad[0]]:.15g}, expected 1")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def normalized(cls, vectors) -> "InternalStateSet":
        v = np.asarray(vectors, dtype=complex)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True))

    def permuted(self, order) -> "InternalStateSet":
        return InternalStateSet(self.vectors[list(order)])


def gram_matrix(states: InternalStateSet) -> np.ndarray:
    """Distinguishability matrix of a state set; the diagonal is set to exactly 1."""
    if not isinstance(states, InternalStateSet):
        states = InternalStateSet(states)
    v = states.vectors
    S = v.conj() @ v.T
    np.fill_diagonal(S, 1.0)
    return S


def validate_distinguishability(S, check_bounds: bool = True) -> list[str]:
    """Return every violated invariant of a candidate distinguishability matrix."""
    problems = []
    S = np.asarray(S, dtype=complex)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        return [f"S must be square, got shape {S.shape}"]
    if not np.all(np.isfinite(S)):
        return ["S contains NaN or Inf"]
    n = S.shape[0]
    if not np.all(np.diag(S) == 1.0):
        problems.append("unit diagonal: S[j, j] must equal 1")
    herm = np.max(np.abs(S - S.conj().T), initial=0.0)
    if herm > HERMITIAN_TOL:
        problems.append(f"hermitian: max |S - S^dag| = {herm:.2e}")
    if np.max(np.abs(S), initial=0.0) > 1 + NORM_TOL:
        problems.append("entries must satisfy |S[j, k]| <= 1")
    if not problems or herm <= HERMITIAN_TOL:
        low = float(np.min(np.linalg.eigvalsh((S + S.conj().T) / 2)))
        if low < -PSD_TOL:
            problems.append(f"positive semidefinite: minimum eigenvalue {low:.3e}")
    if check_bounds and not problems and n <= 20:
        p = permanent(S).real
        if not 1 - 1e-9 <= p <= math.factorial(n) * (1 + 1e-9):
            problems.append(f"permanent bounds: perm(S) = {p:.6g} outside [1, {math.factorial(n)}]")
    return problems


def check_distinguishability(S) -> np.ndarray:
    problems = validate_distinguishability(S)
    if problems:
        raise ValidationError("invalid distinguishability matrix: " + "; ".join(problems))
    return np.asarray(S, dtype=complex)


def canonical_family(n: int, x: float):
    """Equal pairwise overlap ``x`` and a realization in ``n + 1`` dimensions.

    Particle ``k`` is ``sqrt(x) e_0 + sqrt(1 - x) e_{k+1}``.
    """
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x}")
    vectors = np.zeros((n, n + 1), dtype=complex)
    vectors[:, 0] = math.sqrt(x)
    vectors[np.arange(n), np.arange(1, n + 1)] = math.sqrt(1.0 - x)
    S = np.full((n, n), x, dtype=complex)
    np.fill_diagonal(S, 1.0)
    return S, InternalStateSet(vectors)


def fourier_example_S(x: float) -> np.ndarray:
    """Three mutually identical particles plus a fourth with overlap ``x`` to each."""
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"x must lie in [0, 1], got {x}")
    S = np.ones((4, 4), dtype=complex)
    S[3, :3] = x
    S[:3, 3] = x
    return S


def random_states(n: int, dim: int, seed) -> InternalStateSet:
    """``n`` independent vectors uniform on the unit sphere of ``C^dim``."""
    if dim < 1:
        raise ValidationError("internal dimension must be >= 1")
    rng = make_rng(seed)
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return InternalStateSet.normalized(z)


@dataclass(frozen=True)
class GramSchmidtDecomposition:
    """Triangular expansion of the processed states in an orthonormal basis.

    ``coefficients[j, k] = <basis_k | phi_{order[j]}>``; row ``j`` has nonzero
    entries only for basis vectors created at or before step ``j``.
    """

    coefficients: np.ndarray
    basis: np.ndarray
    order: tuple[int, ...]

    def reconstruct(self) -> np.ndarray:
        """The input vectors, in the original (unprocessed) labeling."""
        out = np.empty((len(self.order), self.basis.shape[1]), dtype=complex)
        out[list(self.order)] = self.coefficients @ self.basis
        return out

    def coefficients_by_particle(self) -> np.ndarray:
        """``c[i, k]`` for particle ``i`` in the original labeling."""
        c = np.empty_like(self.coefficients)
        c[list(self.order)] = self.coefficients
        return c


def gram_schmidt(states: InternalStateSet, order=None, strict: bool = False) -> GramSchmidtDecomposition:
    """Orthonormalize the states in the given processing order.

    A vector whose residual after projection has norm below ``RANK_TOL`` adds
    no basis vector (it lies in the existing span); with ``strict=True`` that
    raises :class:`DegeneracyError` instead.
    """
    n = states.n
    order = tuple(range(n)) if order is None else tuple(int(i) for i in order)
    if sorted(order) != list(range(n)):
        raise ValidationError(f"order must be a permutation of range({n})")
    basis: list[np.ndarray] = []
    coeffs = np.zeros((n, n), dtype=complex)
    for row, idx in enumerate(order):
        v = states.vectors[idx]
        resid = v.copy()
        for k, b in enumerate(basis):
            c = np.vdot(b, v)
            coeffs[row, k] = c
            resid = resid - c * b
        # second pass against accumulated rounding
        for k, b in enumerate(basis):
            c = np.vdot(b, resid)
            coeffs[row, k] += c
            resid = resid - c * b
        norm = np.linalg.norm(resid)
        if norm < RANK_TOL:
            if strict:
                raise DegeneracyError(f"state {idx} is linearly dependent on earlier states")
            continue
        coeffs[row, len(basis)] = norm
        basis.append(resid / norm)
    k = len(basis)
    return GramSchmidtDecomposition(coeffs[:, :k].copy(), np.array(basis), order)


def w_id(dec: GramSchmidtDecomposition) -> float:
    """Weight of the component with every particle in the first basis state."""
    c = dec.coefficients[:, 0]
    return float(np.prod(np.abs(c[1:]) ** 2))


@dataclass(frozen=True)
class MixedEnsemble:
    """Probability-weighted pure state sets; ``kind`` is ``product`` or ``correlated``."""

    weights: np.ndarray
    realizations: tuple[InternalStateSet, ...]
    kind: str = "correlated"
    # per-particle mixtures, kept for product ensembles (cycle-factorized J)
    factors: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size != len(self.realizations) or w.size == 0:
            raise ValidationError("need one weight per realization")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"weights must be >= 0 and sum to 1 (sum = {w.sum():.15g})")
        shapes = {r.vectors.shape for r in self.realizations}
        if len(shapes) != 1:
            raise ValidationError(f"realizations disagree in (n, D): {sorted(shapes)}")
        if self.kind not in ("product", "correlated"):
            raise ValidationError(f"unknown ensemble kind {self.kind!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.realizations[0].n

    @property
    def dim(self) -> int:
        return self.realizations[0].dim

    def gram_matrices(self) -> np.ndarray:
        return np.array([gram_matrix(r) for r in self.realizations])

    @classmethod
    def pure(cls, states: InternalStateSet) -> "MixedEnsemble":
        return cls(np.ones(1), (states,), "correlated")

    @classmethod
    def product(cls, mixtures) -> "MixedEnsemble":
        """Uncorrelated particles; ``mixtures[j]`` is a list of ``(p, vector)`` for particle j.

        The tuple product is expanded into explicit realizations.
        """
        mixtures = [[(float(p), np.asarray(v, dtype=complex)) for p, v in mix] for mix in mixtures]
        count = math.prod(len(mix) for mix in mixtures)
        if count > MAX_REALIZATIONS:
            raise CapacityError(f"product ensemble has {count} realizations (limit {MAX_REALIZATIONS})")
        weights, sets = [], []
        for combo in product(*mixtures):
            weights.append(math.prod(p for p, _ in combo))
            sets.append(InternalStateSet(np.array([v for _, v in combo])))
        w = np.array(weights)
        # product of normalized weights can drift by an ulp
        w = w / w.sum()
        return cls(w, tuple(sets), "product", factors=tuple(tuple(m) for m in mixtures))

    @classmethod
    def trivial_mixture(cls, n: int, gamma: float) -> "MixedEnsemble":
        """All particles in one shared state with probability ``1 - gamma``,
        all in mutually orthogonal states with probability ``gamma``."""
        if not 0.0 <= gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {gamma}")
        same = np.zeros((n, n + 1), dtype=complex)
        same[:, 0] = 1.0
        distinct = np.zeros((n, n + 1), dtype=complex)
        distinct[np.arange(n), np.arange(1, n + 1)] = 1.0
        return cls(np.array([1.0 - gamma, gamma]), (InternalStateSet(same), InternalStateSet(distinct)))


def j_function(ensemble: MixedEnsemble, sigma, rho) -> complex:
    """Ensemble average of ``prod_j S[rho_j, sigma_j]``."""
    sigma = np.asarray(sigma, dtype=np.intp)
    rho = np.asarray(rho, dtype=np.intp)
    grams = ensemble.gram_matrices()
    vals = np.prod(grams[:, rho, sigma], axis=1)
    return complex(np.dot(ensemble.weights, vals))


def j_table(ensemble: MixedEnsemble, perms) -> np.ndarray:
    """``J[a, b] = J(perms[a], perms[b])`` for all pairs."""
    perms = np.asarray(perms, dtype=np.intp)
    out = np.zeros((len(perms), len(perms)), dtype=complex)
    for w, S in zip(ensemble.weights, ensemble.gram_matrices()):
        out += w * np.prod(S[perms[None, :, :], perms[:, None, :]], axis=2)
    return out


def _cycles(pairs: dict[int, int]):
    seen, cycles = set(), []
    for start in pairs:
        if start in seen:
            continue
        cyc, j = [], start
        while j not in seen:
            seen.add(j)
            cyc.append(j)
            j = pairs[j]
        cycles.append(cyc)
    return cycles


def j_function_factorized(ensemble: MixedEnsemble, sigma, rho) -> complex:
    """J for a product ensemble, averaging each cycle of particles independently.

    Particle ``rho_j`` meets ``sigma_j``; the overlaps chain particles into
    disjoint cycles, and independent particles make the average factorize
    over those cycles.
    """
    if ensemble.kind != "product" or not ensemble.factors:
        raise ValidationError("cycle factorization needs a product ensemble")
    sigma = [int(v) for v in sigma]
    rho = [int(v) for v in rho]
    links = {rho[j]: sigma[j] for j in range(len(sigma))}
    total = 1.0 + 0j
    for cyc in _cycles(links):
        acc = 0j
        for combo in product(*(range(len(ensemble.factors[p])) for p in cyc)):
            choice = dict(zip(cyc, combo))
            weight, value = 1.0, 1.0 + 0j
            for p in cyc:
                w_p, v_p = ensemble.factors[p][choice[p]]
                weight *= w_p
                q = links[p]
                if q != p:
                    value *= np.vdot(v_p, ensemble.factors[q][choice[q]][1])
            acc += weight * value
        total *= acc
    return complex(total)
