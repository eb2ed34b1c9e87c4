"""Experiment configuration documents (JSON, ``schema: 1``).

Complex numbers are ``[re, im]`` pairs (bare reals are accepted too),
matrices are row-major nested lists, occupations are integer lists.
Unknown fields are rejected.
"""

from __future__ import annotations

import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from .distinguishability import (
    InternalStateSet,
    MixedEnsemble,
    canonical_family,
    fourier_example_S,
    gram_matrix,
    validate_distinguishability,
)
from .errors import BosonPermError, DimensionError, ValidationError
from .permanent import MAX_BRUTEFORCE_N, MAX_TENSOR_RYSER_N
from .probability import MAX_MIXED_J_N, MAX_ORTHO_N
from .scattering import (
    check_unitary,
    fourier_unitary,
    haar_random_unitary,
    make_rng,
)

COMMANDS = (
    "prob", "distribution", "sweep-transition", "scan-random", "scan-fourier",
    "bounds", "bunching", "sample", "validate",
)

Number = Union[float, list[float]]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class UnitarySpec(_Model):
    kind: Literal["haar", "fourier", "explicit"]
    m: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = None
    entries: Optional[list[list[Number]]] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "explicit" and self.entries is None:
            raise ValueError("explicit unitary needs 'entries'")
        if self.kind != "explicit" and self.m is None:
            raise ValueError(f"{self.kind} unitary needs 'm'")
        return self


class CanonicalS(_Model):
    n: int = Field(ge=1)
    x: float = Field(ge=0.0, le=1.0)


class FourierExampleS(_Model):
    x: float = Field(ge=0.0, le=1.0)


class GramS(_Model):
    states: list[list[Number]]


class SSpec(_Model):
    canonical: Optional[CanonicalS] = None
    fourierExample: Optional[FourierExampleS] = None
    gram: Optional[GramS] = None
    explicit: Optional[list[list[Number]]] = None

    @model_validator(mode="after")
    def _one(self):
        given = [k for k in ("canonical", "fourierExample", "gram", "explicit") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError(f"S spec needs exactly one of canonical/fourierExample/gram/explicit, got {given}")
        return self


class Realization(_Model):
    p: float = Field(ge=0.0)
    states: list[list[Number]]


class TrivialMixture(_Model):
    n: int = Field(ge=1)
    gamma: float = Field(ge=0.0, le=1.0)


class EnsembleSpec(_Model):
    realizations: Optional[list[Realization]] = None
    trivialMixture: Optional[TrivialMixture] = None
    kind: Literal["product", "correlated"] = "correlated"

    @model_validator(mode="after")
    def _one(self):
        if (self.realizations is None) == (self.trivialMixture is None):
            raise ValueError("ensemble needs exactly one of 'realizations' or 'trivialMixture'")
        return self


class OutputSpec(_Model):
    path: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class ExperimentConfig(_Model):
    schema_: Literal[1] = Field(default=1, alias="schema")
    command: Optional[str] = None
    seed: int = 0
    workers: int = Field(default=1, ge=1)
    unitary: Optional[UnitarySpec] = None
    input: Optional[list[int]] = None
    event: Optional[list[int]] = None
    eventList: Optional[list[list[int]]] = None
    eventPolicy: str = "auto"
    S: Optional[SSpec] = None
    ensemble: Optional[EnsembleSpec] = None
    method: Literal["ryser", "bruteforce", "orthonormalization", "mixed"] = "ryser"
    n: Optional[int] = Field(default=None, ge=1)
    m: Optional[int] = Field(default=None, ge=1)
    ns: Optional[list[int]] = None
    xGrid: Union[int, list[float]] = 15
    repetitions: int = Field(default=1, ge=1)
    D: Optional[list[int]] = None
    draws: int = Field(default=100, ge=1)
    baselineRepetitions: int = Field(default=20, ge=1)
    baselineEvents: str = "auto"
    bounds: list[Literal["nonnegative", "absolute", "real"]] = ["nonnegative", "absolute", "real"]
    mode: int = Field(default=0, ge=0)
    count: int = Field(default=1000, ge=1)
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _command(self):
        if self.command is not None and self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        policy = self.eventPolicy
        if policy not in ("auto", "complete") and not _is_sampled(policy):
            raise ValueError(f"eventPolicy must be auto, complete or sampled:k, got {policy!r}")
        return self


def _is_sampled(policy: str) -> bool:
    if not policy.startswith("sampled:"):
        return False
    try:
        return int(policy.split(":", 1)[1]) > 0
    except ValueError:
        return False


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a configuration document; a run manifest is accepted in its place."""
    if isinstance(doc, dict) and "manifest" in doc:
        doc = doc["manifest"]["config"]
    try:
        return ExperimentConfig.model_validate(doc)
    except PydanticError as exc:
        raise ValidationError(_pydantic_message(exc)) from None


def _pydantic_message(exc: PydanticError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(v) for v in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "invalid config: " + "; ".join(parts)


def to_complex(value, ndim: int) -> np.ndarray:
    """Nested lists of rank ``ndim`` whose leaves are reals or ``[re, im]`` pairs, as a complex array."""

    def leaf(v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return complex(v)
        if isinstance(v, (list, tuple)) and len(v) == 2 and all(
                isinstance(t, (int, float)) and not isinstance(t, bool) for t in v):
            return complex(v[0], v[1])
        raise DimensionError(f"expected a number or [re, im] pair, got {v!r}")

    def walk(v, depth):
        if depth == 0:
            return leaf(v)
        if not isinstance(v, (list, tuple)):
            raise DimensionError(f"expected a rank-{ndim} nested list, got {value!r}")
        return [walk(t, depth - 1) for t in v]

    try:
        return np.array(walk(value, ndim), dtype=complex)
    except ValueError:
        raise DimensionError("ragged array in config") from None


def from_complex(arr) -> list:
    """Inverse of :func:`to_complex`: complex arrays to nested ``[re, im]`` lists."""
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [from_complex(a) for a in arr]


def build_unitary(cfg: ExperimentConfig) -> np.ndarray:
    spec = cfg.unitary
    if spec is None:
        raise ValidationError("config needs a 'unitary'")
    if spec.kind == "fourier":
        return fourier_unitary(spec.m)
    if spec.kind == "haar":
        seed = cfg.seed if spec.seed is None else spec.seed
        return haar_random_unitary(spec.m, make_rng(seed))
    return check_unitary(to_complex(spec.entries, 2))


def _states(rows) -> InternalStateSet:
    return InternalStateSet(to_complex(rows, 2))


def build_internal(cfg: ExperimentConfig):
    """State set, ensemble, or distinguishability matrix described by the config."""
    if cfg.ensemble is not None and cfg.S is not None:
        raise ValidationError("give either 'S' or 'ensemble', not both")
    if cfg.ensemble is not None:
        spec = cfg.ensemble
        if spec.trivialMixture is not None:
            return MixedEnsemble.trivial_mixture(spec.trivialMixture.n, spec.trivialMixture.gamma)
        weights = np.array([r.p for r in spec.realizations])
        sets = tuple(_states(r.states) for r in spec.realizations)
        return MixedEnsemble(weights, sets, spec.kind)
    if cfg.S is None:
        raise ValidationError("config needs 'S' or 'ensemble'")
    spec = cfg.S
    if spec.canonical is not None:
        return canonical_family(spec.canonical.n, spec.canonical.x)[1]
    if spec.fourierExample is not None:
        return fourier_example_S(spec.fourierExample.x)
    if spec.gram is not None:
        return _states(spec.gram.states)
    S = to_complex(spec.explicit, 2)
    problems = validate_distinguishability(S)
    if problems:
        raise ValidationError("explicit S rejected: " + "; ".join(problems))
    return S


def internal_matrix(internal) -> Optional[np.ndarray]:
    if isinstance(internal, InternalStateSet):
        return gram_matrix(internal)
    if isinstance(internal, np.ndarray):
        return internal
    return None


def capacity_estimates(cfg: ExperimentConfig, n: int, realizations: int = 1) -> list[str]:
    """Capacity violations for the configured method, citing predicted term counts."""
    out = []
    method = cfg.method
    if method == "bruteforce" and n > MAX_BRUTEFORCE_N:
        out.append(f"capacity: bruteforce needs n!^2 = {math.factorial(n) ** 2} terms at n={n} "
                   f"(guard n <= {MAX_BRUTEFORCE_N})")
    if method == "ryser" and n > MAX_TENSOR_RYSER_N:
        out.append(f"capacity: tensor Ryser needs 2^(2n) = {4 ** n} terms at n={n} "
                   f"(guard n <= {MAX_TENSOR_RYSER_N})")
    if method == "orthonormalization" and n > MAX_ORTHO_N:
        out.append(f"capacity: orthonormalization needs up to n^n = {n ** n} permanents at n={n} "
                   f"(guard n <= {MAX_ORTHO_N})")
    if method == "mixed" and n > MAX_MIXED_J_N:
        out.append(f"capacity: J path needs n!^2 = {math.factorial(n) ** 2} pairs times R^n = "
                   f"{realizations} realizations at n={n} (guard n <= {MAX_MIXED_J_N})")
    return out


def _particle_count(cfg: ExperimentConfig) -> Optional[int]:
    if cfg.input is not None:
        return sum(cfg.input)
    if cfg.n is not None:
        return cfg.n
    if cfg.S is not None and cfg.S.canonical is not None:
        return cfg.S.canonical.n
    return None


def validate_config(doc) -> list[str]:
    """Every problem found in a configuration document; empty when it is runnable."""
    try:
        cfg = parse_config(doc)
    except ValidationError as exc:
        return [str(exc)]
    problems = []
    m = None
    if cfg.unitary is not None:
        try:
            m = build_unitary(cfg).shape[0]
        except BosonPermError as exc:
            problems.append(f"unitary: {exc}")
    elif cfg.m is not None:
        m = cfg.m
    for name, occ in (("input", cfg.input), ("event", cfg.event), *(("eventList", e) for e in cfg.eventList or ())):
        if occ is None:
            continue
        if any(v < 0 for v in occ):
            problems.append(f"{name}: negative occupation in {occ}")
        if m is not None and len(occ) != m:
            problems.append(f"{name}: {len(occ)} modes, network has {m}")
        if name != "input" and cfg.input is not None and sum(occ) != sum(cfg.input):
            problems.append(f"{name}: {sum(occ)} particles, input has {sum(cfg.input)}")
    n = _particle_count(cfg)
    realizations = 1
    if cfg.S is not None and cfg.S.explicit is not None:
        try:
            S = to_complex(cfg.S.explicit, 2)
            problems.extend(f"S: {p}" for p in validate_distinguishability(S))
        except BosonPermError as exc:
            problems.append(f"S: {exc}")
    elif cfg.S is not None or cfg.ensemble is not None:
        try:
            internal = build_internal(cfg)
            size = internal.n if hasattr(internal, "n") else internal.shape[0]
            if isinstance(internal, MixedEnsemble):
                realizations = len(internal.realizations)
            if cfg.input is not None and size not in (sum(cfg.input), sum(1 for v in cfg.input if v)):
                problems.append(f"S: describes {size} particles, input has {sum(cfg.input)}")
        except BosonPermError as exc:
            problems.append(f"S: {exc}")
    if cfg.ensemble is not None and cfg.ensemble.realizations is not None and n is not None and cfg.method == "mixed":
        realizations = max(realizations, len(cfg.ensemble.realizations))
    if n is not None:
        problems.extend(capacity_estimates(cfg, n, realizations))
    return problems
