"""``bosonperm`` command-line front end.

Every command reads one JSON configuration document and writes a result
document (JSON: ``{schema, command, summary, rows}``; CSV: rows only)
plus a run manifest. Feeding the manifest back as ``--config`` reproduces
the result byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    FIELDS,
    best_mixture,
    bound_check,
    bunching_ratio,
    choose_events,
    distribution,
    fourier_scan,
    random_scan,
    sample_events,
    total_variation,
    transition_sweep,
)
from .config import (
    COMMANDS,
    ExperimentConfig,
    build_internal,
    build_unitary,
    capacity_estimates,
    parse_config,
    validate_config,
)
from .errors import BosonPermError, CapacityError, ValidationError
from .permanent import permanent
from .probability import (
    ScatteringInstance,
    prob_dist,
    prob_id,
    prob_mixed,
    prob_partial,
    prob_via_orthonormalization,
)
from .scattering import make_rng

SCHEMA = 1
# child stream for event sampling in single-instance commands
EVENTS_STREAM = 3


def _event_str(event) -> str:
    return json.dumps([int(v) for v in event], separators=(",", ":"))


def _clean(value):
    """JSON-safe scalar: numpy types to Python, non-finite floats to None."""
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, tuple):
        return _event_str(value)
    return value


def _row(**kw) -> dict:
    return {k: _clean(v) for k, v in kw.items()}


def _instance(cfg: ExperimentConfig) -> ScatteringInstance:
    if cfg.input is None:
        raise ValidationError("config needs an 'input' occupation")
    return ScatteringInstance(build_unitary(cfg), tuple(cfg.input), build_internal(cfg))


def _check_capacity(cfg: ExperimentConfig, n: int):
    problems = capacity_estimates(cfg, n)
    if problems:
        raise CapacityError("; ".join(problems))


def _events(cfg: ExperimentConfig, inst: ScatteringInstance, seed: int) -> tuple[list, str]:
    if cfg.eventList is not None:
        return [tuple(e) for e in cfg.eventList], "listed"
    if cfg.event is not None:
        return [tuple(cfg.event)], "listed"
    return choose_events(inst.m, inst.n, cfg.eventPolicy, make_rng(seed, EVENTS_STREAM))


def _probability(cfg: ExperimentConfig, inst: ScatteringInstance, s) -> float:
    if inst.is_mixed or cfg.method == "mixed":
        if not inst.is_mixed:
            raise ValidationError("method 'mixed' needs an 'ensemble'")
        return prob_mixed(inst, s, path="j" if cfg.method == "mixed" else "ensemble").value
    if cfg.method == "orthonormalization":
        return prob_via_orthonormalization(inst, s).value
    return prob_partial(inst, s, method=cfg.method, workers=cfg.workers).value


def cmd_prob(cfg: ExperimentConfig, seed: int):
    inst = _instance(cfg)
    _check_capacity(cfg, inst.n)
    events, coverage = _events(cfg, inst, seed)
    rows = [_row(event=s, value=_probability(cfg, inst, s), p_id=prob_id(inst, s).value,
                 p_dist=prob_dist(inst, s).value, method=cfg.method) for s in events]
    summary = dict(rows[0]) if len(rows) == 1 else {"n_events": len(rows)}
    return summary, rows, coverage


def cmd_distribution(cfg: ExperimentConfig, seed: int):
    inst = _instance(cfg)
    _check_capacity(cfg, inst.n)
    events, coverage = _events(cfg, inst, seed)
    p_s = np.array([_probability(cfg, inst, s) for s in events])
    p_id = np.array([prob_id(inst, s).value for s in events])
    p_dist = np.array([prob_dist(inst, s).value for s in events])
    fit = best_mixture(p_id, p_dist, p_s)
    rows = [_row(event=s, p_s=a, p_id=b, p_dist=c) for s, a, b, c in zip(events, p_s, p_id, p_dist)]
    summary = _row(n_events=len(events), coverage=coverage, total=float(p_s.sum()),
                   d_id=total_variation(p_id, p_s), d_dist=total_variation(p_dist, p_s),
                   d_id_dist=total_variation(p_id, p_dist), gamma_best=fit.gamma_best, delta=fit.delta)
    return summary, rows, coverage


def _need(cfg: ExperimentConfig, name: str):
    value = getattr(cfg, name)
    if value is None:
        raise ValidationError(f"config needs '{name}'")
    return value


def _records(records):
    rows = [_row(**r.as_dict()) for r in records]
    coverage = sorted({r.coverage for r in records})
    return rows, ",".join(coverage)


def cmd_sweep_transition(cfg: ExperimentConfig, seed: int):
    n = _need(cfg, "n")
    records = transition_sweep(n, cfg.repetitions, cfg.xGrid, seed, cfg.m, cfg.eventPolicy)
    rows, coverage = _records(records)
    return {"n_rows": len(rows)}, rows, coverage


def cmd_scan_random(cfg: ExperimentConfig, seed: int):
    n = _need(cfg, "n")
    unitary = build_unitary(cfg) if cfg.unitary is not None else None
    m = unitary.shape[0] if unitary is not None else cfg.m
    records = random_scan(n, cfg.draws, cfg.D, seed, m, unitary, cfg.eventPolicy)
    rows, coverage = _records(records)
    deltas = np.array([r.delta for r in records])
    return _row(n_rows=len(rows), mean_delta=float(deltas.mean())), rows, coverage


def cmd_scan_fourier(cfg: ExperimentConfig, seed: int):
    ns = _need(cfg, "ns")
    records = fourier_scan(ns, cfg.baselineRepetitions, seed, cfg.baselineEvents)
    rows, coverage = _records(records)
    summary = {}
    for n in ns:
        own = [r for r in records if r.n == n]
        summary[str(n)] = _row(fourier=own[0].d_id_dist, estimate=2 * (n - 1) / n,
                               haar_mean=float(np.mean([r.d_id_dist for r in own[1:]])) if own[1:] else None,
                               suppressed_fraction=own[0].suppressed_fraction)
    return summary, rows, coverage


def cmd_bounds(cfg: ExperimentConfig, seed: int):
    inst = _instance(cfg)
    _check_capacity(cfg, inst.n)
    events, coverage = _events(cfg, inst, seed)
    rows = []
    for s in events:
        for kind in cfg.bounds:
            rep = bound_check(inst, s, kind)
            rows.append(_row(event=s, kind=kind, lhs=rep.lhs, rhs=rep.rhs, applicable=rep.applicable,
                             holds=rep.holds, reason=rep.reason))
    violated = sum(1 for r in rows if r["holds"] is False)
    return {"n_checks": len(rows), "violations": violated}, rows, coverage


def cmd_bunching(cfg: ExperimentConfig, seed: int):
    inst = _instance(cfg)
    _check_capacity(cfg, inst.n)
    S = inst.distinguishability()
    expected = permanent(S).real / math.prod(math.factorial(v) for v in inst.occupation)
    row = _row(mode=cfg.mode, ratio=bunching_ratio(inst, cfg.mode), expected=expected)
    return dict(row), [row], "listed"


def cmd_sample(cfg: ExperimentConfig, seed: int):
    inst = _instance(cfg)
    _check_capacity(cfg, inst.n)
    dist = distribution(inst)
    drawn = sample_events(dist, cfg.count, make_rng(seed, EVENTS_STREAM))
    rows = [_row(index=i, event=s) for i, s in enumerate(drawn)]
    return {"count": len(rows), "distinct": len(set(drawn))}, rows, "complete"


HANDLERS = {
    "prob": cmd_prob,
    "distribution": cmd_distribution,
    "sweep-transition": cmd_sweep_transition,
    "scan-random": cmd_scan_random,
    "scan-fourier": cmd_scan_fourier,
    "bounds": cmd_bounds,
    "bunching": cmd_bunching,
    "sample": cmd_sample,
}


def render_csv(rows) -> str:
    buf = io.StringIO()
    columns = list(FIELDS) if rows and set(rows[0]) == set(FIELDS) else list(rows[0]) if rows else []
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def render_json(command: str, summary, rows) -> str:
    return json.dumps({"schema": SCHEMA, "command": command, "summary": summary, "rows": rows}, indent=1) + "\n"


def _load(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None


def run(command: str, doc: dict, seed=None, out=None, fmt=None, workers=None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if command == "validate":
        problems = validate_config(doc)
        stdout.write(json.dumps({"schema": SCHEMA, "command": "validate", "problems": problems}, indent=1) + "\n")
        return 0 if not problems else 2
    try:
        cfg = parse_config(doc)
        overrides = {"command": command}
        if seed is not None:
            overrides["seed"] = seed
        if workers is not None:
            overrides["workers"] = workers
        output = cfg.output.model_copy(update={k: v for k, v in (("path", out), ("format", fmt)) if v is not None})
        cfg = cfg.model_copy(update={**overrides, "output": output})
        start = time.perf_counter()
        summary, rows, coverage = HANDLERS[command](cfg, cfg.seed)
        elapsed = time.perf_counter() - start
    except BosonPermError as exc:
        stderr.write(f"bosonperm {command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    text = render_csv(rows) if cfg.output.format == "csv" else render_json(command, summary, rows)
    manifest = {
        "schema": SCHEMA,
        "manifest": {
            "config": cfg.model_dump(by_alias=True, exclude_none=True),
            "version": __version__,
            "seeds": {"seed": cfg.seed, "rule": "PCG64(SeedSequence(seed, spawn_key=(experiment, ...)))"},
            "workers": cfg.workers,
            "coverage": coverage,
            "wall_clock_s": elapsed,
        },
    }
    manifest_text = json.dumps(manifest, indent=1) + "\n"
    if cfg.output.path:
        path = Path(cfg.output.path)
        path.write_text(text, newline="")
        Path(str(path) + ".manifest.json").write_text(manifest_text)
    else:
        stdout.write(text)
        stderr.write(manifest_text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosonperm", description="Partially distinguishable boson scattering.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config or run manifest ('-' for stdin)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="result file; the manifest goes to <out>.manifest.json")
    parser.add_argument("--format", choices=("json", "csv"), dest="fmt")
    parser.add_argument("--workers", type=int, help="worker processes for the tensor permanent")
    parser.add_argument("--version", action="version", version=f"bosonperm {__version__}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = _load(args.config)
    except BosonPermError as exc:
        sys.stderr.write(f"bosonperm: {exc}\n")
        return exc.exit_code
    if args.workers is not None and args.workers < 1:
        sys.stderr.write("bosonperm: --workers must be >= 1\n")
        return 2
    return run(args.command, doc, args.seed, args.out, args.fmt, args.workers)


if __name__ == "__main__":
    sys.exit(main())
