import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from bosonperm.cli import main
from bosonperm.config import build_internal, build_unitary, parse_config, to_complex, validate_config
from bosonperm.errors import DimensionError, ValidationError

FOURIER_DOC = {
    "schema": 1,
    "unitary": {"kind": "fourier", "m": 9},
    "input": [1, 0, 0, 1, 0, 0, 1, 0, 1],
    "event": [0, 1, 1, 0, 1, 0, 0, 0, 1],
    "S": {"fourierExample": {"x": 0.5}},
}


def write(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_to_complex_pairs_and_reals():
    assert np.array_equal(to_complex([[1, [0, 1]], [[2, -1], 0.5]], 2), np.array([[1, 1j], [2 - 1j, 0.5]]))
    with pytest.raises(DimensionError):
        to_complex([[1, 2, 3]], 3)


def test_unknown_fields_rejected():
    with pytest.raises(ValidationError):
        parse_config({"schema": 1, "colour": "blue"})
    with pytest.raises(ValidationError):
        parse_config({"schema": 2})
    with pytest.raises(ValidationError):
        parse_config({"S": {"canonical": {"n": 3, "x": 0.5}, "fourierExample": {"x": 0.1}}})


def test_builders():
    cfg = parse_config({"unitary": {"kind": "explicit", "entries": [[[0, 1], 0], [0, [0, 1]]]},
                        "S": {"gram": {"states": [[1, 0], [[0, 1], 0]]}}})
    assert np.allclose(build_unitary(cfg), 1j * np.eye(2))
    states = build_internal(cfg)
    assert states.n == 2
    cfg = parse_config({"ensemble": {"realizations": [{"p": 0.5, "states": [[1, 0]]}, {"p": 0.5, "states": [[0, 1]]}]}})
    assert len(build_internal(cfg).realizations) == 2


def test_prob_fourier_json(tmp_path, capsys):
    assert main(["prob", "--config", write(tmp_path, FOURIER_DOC)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["schema"] == 1 and out["command"] == "prob"
    assert out["summary"]["value"] <= 1e-10
    assert out["summary"]["p_dist"] == pytest.approx(24 / 9**4, abs=1e-12)


def test_prob_writes_result_and_manifest(tmp_path):
    out = tmp_path / "r.json"
    assert main(["prob", "--config", write(tmp_path, FOURIER_DOC), "--out", str(out)]) == 0
    manifest = json.loads((tmp_path / "r.json.manifest.json").read_text())["manifest"]
    assert manifest["config"]["command"] == "prob"
    assert manifest["seeds"]["seed"] == 0
    assert manifest["workers"] == 1
    assert "wall_clock_s" in manifest and "version" in manifest and "coverage" in manifest


def test_sweep_transition_csv_and_rerun(tmp_path):
    doc = {"schema": 1, "n": 3, "repetitions": 10, "xGrid": 15, "seed": 11}
    first = tmp_path / "a.csv"
    assert main(["sweep-transition", "--config", write(tmp_path, doc), "--out", str(first), "--format", "csv"]) == 0
    with open(first, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 150
    assert {r["seed"] for r in rows} == {"11"} and {r["coverage"] for r in rows} == {"complete"}
    second = tmp_path / "b.csv"
    assert main(["sweep-transition", "--config", str(first) + ".manifest.json", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_csv_and_json_hold_identical_numbers(tmp_path):
    doc = {"n": 3, "repetitions": 1, "xGrid": 3, "seed": 2}
    cfg = write(tmp_path, doc)
    assert main(["sweep-transition", "--config", cfg, "--out", str(tmp_path / "a.csv"), "--format", "csv"]) == 0
    assert main(["sweep-transition", "--config", cfg, "--out", str(tmp_path / "a.json")]) == 0
    with open(tmp_path / "a.csv", newline="") as fh:
        csv_rows = list(csv.DictReader(fh))
    json_rows = json.loads((tmp_path / "a.json").read_text())["rows"]
    for c, j in zip(csv_rows, json_rows):
        assert float(c["d_id"]) == j["d_id"]
        assert float(c["gamma_best"]) == j["gamma_best"]


def test_seed_override_changes_output(tmp_path, capsys):
    doc = write(tmp_path, {"n": 3, "repetitions": 1, "xGrid": 2})
    main(["sweep-transition", "--config", doc, "--seed", "1"])
    a = json.loads(capsys.readouterr().out)["rows"]
    main(["sweep-transition", "--config", doc, "--seed", "2"])
    b = json.loads(capsys.readouterr().out)["rows"]
    assert a[0]["seed"] == 1 and b[0]["seed"] == 2 and a[0]["d_id_dist"] != b[0]["d_id_dist"]


def test_other_commands(tmp_path, capsys):
    doc = {"unitary": {"kind": "haar", "m": 4, "seed": 3}, "input": [2, 1, 0, 0],
           "S": {"gram": {"states": [[1, 0], [0.6, 0.8]]}}, "eventPolicy": "complete", "count": 20}
    cfg = write(tmp_path, doc)
    assert main(["distribution", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["summary"]["total"] == pytest.approx(1.0, abs=1e-10) and len(out["rows"]) == 20
    assert main(["bunching", "--config", cfg]) == 0
    row = json.loads(capsys.readouterr().out)["rows"][0]
    assert row["ratio"] == pytest.approx(row["expected"], rel=1e-9)
    assert main(["sample", "--config", cfg]) == 0
    assert len(json.loads(capsys.readouterr().out)["rows"]) == 20
    assert main(["bounds", "--config", cfg]) == 0
    assert json.loads(capsys.readouterr().out)["summary"]["violations"] == 0


def test_scan_commands(tmp_path, capsys):
    assert main(["scan-random", "--config", write(tmp_path, {"n": 3, "draws": 3, "D": [2, 3]})]) == 0
    assert len(json.loads(capsys.readouterr().out)["rows"]) == 6
    assert main(["scan-fourier", "--config", write(tmp_path, {"ns": [2], "baselineRepetitions": 2})]) == 0
    summary = json.loads(capsys.readouterr().out)["summary"]
    assert summary["2"]["fourier"] == pytest.approx(1.0)


def test_exit_codes(tmp_path, capsys):
    assert main(["prob", "--config", write(tmp_path, {"schema": 1, "bogus": True})]) == 2
    bad = dict(FOURIER_DOC, S={"explicit": [[0.9, 0], [0, 1]]}, input=[1, 1, 0, 0, 0, 0, 0, 0, 0],
               event=[1, 1, 0, 0, 0, 0, 0, 0, 0])
    assert main(["prob", "--config", write(tmp_path, bad)]) == 2
    big = {"unitary": {"kind": "fourier", "m": 10}, "input": [1] * 10, "event": [1] * 10,
           "S": {"canonical": {"n": 10, "x": 0.5}}, "method": "bruteforce"}
    assert main(["prob", "--config", write(tmp_path, big)]) == 3
    assert main(["prob", "--config", str(tmp_path / "missing.json")]) == 2
    assert "CapacityError" in capsys.readouterr().err


def test_validate_reports():
    bad_S = {"S": {"explicit": [[0.9, 0], [0, 1]]}}
    assert any("unit diagonal" in p for p in validate_config(bad_S))
    big = {"method": "bruteforce", "n": 10}
    problems = validate_config(big)
    assert any("n!^2" in p for p in problems)
    ok = {"unitary": {"kind": "haar", "m": 6}, "input": [1, 1, 1, 0, 0, 0], "S": {"canonical": {"n": 3, "x": 0.4}}}
    assert validate_config(ok) == []
    mismatch = {"unitary": {"kind": "fourier", "m": 4}, "input": [1, 1, 0], "event": [1, 0, 0, 0]}
    assert len(validate_config(mismatch)) >= 2
    assert any("2^(2n)" in p for p in validate_config({"n": 16}))
    assert any("PSD" in p or "semidefinite" in p for p in validate_config({"S": {"explicit": [[1, 1], [1, -0.5]]}}))


def test_validate_command_exit(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, {"S": {"explicit": [[0.9, 0], [0, 1]]}})]) == 2
    assert "unit diagonal" in capsys.readouterr().out
    assert main(["validate", "--config", write(tmp_path, {"n": 3})]) == 0


@pytest.mark.skipif(shutil.which("bosonperm") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["bosonperm", "prob", "--config", write(tmp_path, FOURIER_DOC), "--format", "csv"],
                          capture_output=True, text=True, check=True)
    lines = proc.stdout.splitlines()
    assert lines[0] == "event,value,p_id,p_dist,method"
    assert json.loads(proc.stderr)["manifest"]["config"]["output"]["format"] == "csv"
