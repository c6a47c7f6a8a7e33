from __future__ import annotations

import json

import pytest

from hxlab.cli import EXIT_ASSERT, EXIT_DOMAIN, EXIT_PARSE, main, write_atomic


def _fn(path, values, domain=False):
    level = {1: 0, 2: 1, 4: 2, 8: 3, 16: 4}[len(values)]
    obj = {"dim": 1, "level": level, "denominator": 1,
           "cells": [{"idx": [i], "value": v} for i, v in enumerate(values) if v]}
    if domain:
        obj["domain"] = [["0", "1"]]
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    return {
        "w": _fn(tmp_path / "w.json", [1, 2], domain=True),
        "one": _fn(tmp_path / "one.json", [1, 1, 1, 1]),
        "spike": _fn(tmp_path / "spike.json", [4, 0, 0, 0]),
        "S": _write(tmp_path / "S.json", {"cubes": [{"shift": [0], "level": 0, "index": [0]}]}),
        "w1": _fn(tmp_path / "w1.json", [1] * 16, domain=True),
        "tmp": tmp_path,
    }


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_constants(files, capsys):
    code, out, _ = _run(capsys, ["constants", files["w"], "--p", "2"])
    assert code == 0
    rep = json.loads(out)["report"]["constants"]
    assert {c["name"]: c["value"] for c in rep}["A_2"] == pytest.approx(1.125)


def test_constants_csv_manifest_line(files, capsys):
    code, out, _ = _run(capsys, ["constants", files["w"], "--format", "csv"])
    assert code == 0 and out.startswith("# manifest: {")


def test_parse_error_missing_cells(files, capsys):
    bad = _write(files["tmp"] / "bad.json", {"dim": 1, "level": 1, "denominator": 1})
    code, _, err = _run(capsys, ["constants", bad])
    assert code == EXIT_PARSE and "cells" in err
    code, _, err = _run(capsys, ["constants", str(files["tmp"] / "nope.json")])
    assert code == EXIT_PARSE


def test_decompose(files, capsys):
    code, out, _ = _run(capsys, ["decompose", files["spike"], "--lambda", "2"])
    body = json.loads(out)["report"]
    assert code == 0 and body["all_pass"]
    code, _, err = _run(capsys, ["decompose", files["one"], "--lambda", "0.5"])
    assert code == EXIT_DOMAIN and "level too small" in err
    code, out, _ = _run(capsys, ["decompose", files["one"], "--lambda", "0.5", "--mode", "unbounded"])
    assert code == 0


def test_sparse_form_and_verify(files, capsys):
    code, out, _ = _run(capsys, ["sparse", "form", files["S"], "--f", files["one"]])
    assert code == 0 and json.loads(out)["report"]["form"] == pytest.approx(1.0)
    code, out, _ = _run(capsys, ["sparse", "verify", files["S"]])
    body = json.loads(out)["report"]
    assert code == 0 and body["ok"] and body["eta"] == 1.0


def test_norm_deterministic_and_witness(files, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    out1, out2 = files["tmp"] / "a.json", files["tmp"] / "b.json"
    base = ["sparse", "norm", files["S"], "--weight", files["w1"], "--p", "2",
            "--seed", "7", "--budget", "50"]
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--out", str(out2)]) == 0
    a, b = json.loads(out1.read_text()), json.loads(out2.read_text())
    assert a["report"]["estimate"] == b["report"]["estimate"] == pytest.approx(1.0)
    assert a["manifest"]["timestamp"] == "2023-11-14T22:13:20Z"
    for d in (a, b):
        d["manifest"]["inputs"] = d["report"]["witness_path"] = None
    assert a == b
    assert (files["tmp"] / "a.json.witness.json").exists()
    capsys.readouterr()


def test_norm_errors(files, capsys):
    base = ["sparse", "norm", files["S"], "--weight", files["w1"]]
    code, _, _ = _run(capsys, base + ["--p", "1", "--seed", "1"])
    assert code == EXIT_DOMAIN
    with pytest.raises(SystemExit) as exc:
        main(base + ["--p", "2"])
    assert exc.value.code == EXIT_PARSE
    capsys.readouterr()


def test_lab_thm11_and_violation(capsys):
    argv = ["lab", "thm11", "--collection", "single", "--deltas", "1", "--level", "4",
            "--seed", "0", "--budget", "50"]
    code, out, _ = _run(capsys, argv)
    assert code == 0
    code, out, err = _run(capsys, argv + ["--scale", "100"])
    assert code == EXIT_ASSERT and "violation" in err and out


def test_lab_exponents_single(capsys):
    code, out, _ = _run(capsys, ["lab", "exponents", "--collection", "single", "--level", "4",
                                 "--seed", "0", "--budget", "50", "--format", "csv"])
    assert code == 0
    alpha, gamma = out.splitlines()[2].split(",")[:2]
    assert abs(float(alpha)) < 1e-9 and abs(float(gamma)) < 1e-9


def test_lab_optimality_runs(capsys):
    code, out, _ = _run(capsys, ["lab", "optimality", "--collection", "single", "--level", "5",
                                 "--deltas", "1,0.5,0.25", "--seed", "0", "--budget", "50"])
    assert code == 0 and "beta_hat" in out


def test_write_atomic_replaces(tmp_path):
    target = tmp_path / "sub" / "r.txt"
    write_atomic(str(target), "one")
    write_atomic(str(target), "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["r.txt"]
