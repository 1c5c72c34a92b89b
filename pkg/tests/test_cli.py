import json
import random
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sketchjl.cli import main, run_manifest_entry
from sketchjl.formats import ParseError, parse_dense_rows, parse_pairs
from sketchjl.errors import ShapeError
from sketchjl.sparse_jl import SparseJLTransform

GOLDEN = Path(__file__).parent / "golden"
TINY = str(GOLDEN / "tiny_transform.json")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_sparse_json(capsys):
    code, out, _ = run(capsys, "plan", "--family", "sparse", "--epsilon", "0.25", "--delta", "0.05", "--d", "16")
    assert code == 0
    plan = json.loads(out)
    assert (plan["k"], plan["alpha"], plan["c"], plan["r_h"], plan["r_sigma"]) == (277, 256, 0.0625, 26, 10)
    assert plan["seed_bits"] == 36 * 61


def test_plan_dense_and_cascade(capsys):
    code, out, _ = run(capsys, "plan", "--family", "dense", "--epsilon", "0.1", "--delta", "0.01")
    assert code == 0 and json.loads(out)["k"] == 1843
    code, out, _ = run(
        capsys, "plan", "--family", "cascade", "--epsilon", "0.1", "--delta", str(2.0**-15), "--d", "1000000000"
    )
    plan = json.loads(out)
    assert plan["t_values"] == [256.0, 16.0, 4.0, 2.0]
    assert plan["delta_prime"] == 2.0**-16


def test_plan_text_format(capsys):
    code, out, _ = run(capsys, "plan", "--epsilon", "0.25", "--delta", "0.05", "--d", "16", "--format", "text")
    assert code == 0 and "k: 277" in out.splitlines()


def test_profile_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("SKETCHJL_PROFILE", "paper")
    with pytest.warns(UserWarning):
        code, out, _ = run(capsys, "plan", "--epsilon", "0.1", "--delta", str(2.0**-10), "--d", "1")
    assert code == 0 and json.loads(out)["k"] == 114_688_000


def test_missing_and_invalid_parameters(capsys):
    code, _, err = run(capsys, "plan", "--delta", "0.05", "--d", "16")
    assert code == 2 and "--epsilon" in err
    code, _, _ = run(capsys, "plan", "--epsilon", "0.9", "--delta", "0.05", "--d", "16")
    assert code == 2


def test_sample_then_embed_round_trip(tmp_path, capsys):
    desc = tmp_path / "t.json"
    code, _, _ = run(
        capsys, "sample", "--epsilon", "0.25", "--delta", "0.05", "--d", "6", "--seed", "00aa", "--output", str(desc)
    )
    assert code == 0
    t = SparseJLTransform.from_descriptor(json.loads(desc.read_text()))
    vec = tmp_path / "x.txt"
    vec.write_text("1 2 0 0 -1 0.5\n")
    code, out, _ = run(capsys, "embed", "--transform", str(desc), "--input", str(vec))
    y = np.array([float(v) for v in out.strip().split(",")])
    np.testing.assert_array_equal(y, t.apply(np.array([1, 2, 0, 0, -1, 0.5])))


def test_sample_bad_seed(capsys):
    code, _, _ = run(capsys, "sample", "--epsilon", "0.25", "--delta", "0.05", "--d", "6", "--seed", "xyz")
    assert code == 4


def test_embed_matches_golden(capsys):
    code, out, _ = run(capsys, "embed", "--transform", TINY, "--input", str(GOLDEN / "tiny_vectors.txt"))
    assert code == 0
    assert out == (GOLDEN / "tiny_embed.txt").read_text()


def test_embed_golden_is_the_materialized_product():
    t = SparseJLTransform.from_descriptor(json.loads(Path(TINY).read_text()))
    M = t.materialize()
    xs = parse_dense_rows((GOLDEN / "tiny_vectors.txt").read_text(), 2)
    rows = [[float(v) for v in line.split(",")] for line in (GOLDEN / "tiny_embed.txt").read_text().splitlines()]
    for x, row in zip(xs, rows):
        np.testing.assert_allclose(row, M @ x, rtol=0, atol=1e-15)


def test_embed_zero_and_sparse_input(tmp_path, capsys):
    z = tmp_path / "z.txt"
    z.write_text("0\n0\n")
    code, out, _ = run(capsys, "embed", "--transform", TINY, "--input", str(z))
    assert code == 0 and out == "0.0,0.0,0.0,0.0\n"
    s = tmp_path / "s.txt"
    s.write_text("2 1.0\n")
    code, out, _ = run(capsys, "embed", "--transform", TINY, "--input", str(s), "--input-format", "sparse")
    assert out.splitlines()[0] == (GOLDEN / "tiny_embed.txt").read_text().splitlines()[1]


def test_embed_is_deterministic(tmp_path, capsys):
    outs = []
    for _ in range(2):
        code, out, _ = run(
            capsys, "embed", "--transform", TINY, "--input", str(GOLDEN / "tiny_vectors.txt"), "--format", "json"
        )
        outs.append(out)
    assert outs[0] == outs[1]


def test_embed_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1,2,3\n")
    assert run(capsys, "embed", "--transform", TINY, "--input", str(bad))[0] == 3
    bad.write_text("1,abc\n")
    assert run(capsys, "embed", "--transform", TINY, "--input", str(bad))[0] == 4
    assert run(capsys, "embed", "--transform", str(tmp_path / "missing.json"), "--input", str(bad))[0] == 4
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert run(capsys, "embed", "--transform", str(junk), "--input", str(bad))[0] == 4


def test_sketch_stream(tmp_path, capsys):
    stream = tmp_path / "s.txt"
    stream.write_text("1 2.0\n2 -1.0\n1 -2.0\n2 1.0\n")
    code, out, _ = run(capsys, "sketch", "--transform", TINY, "--input", str(stream))
    res = json.loads(out)
    assert code == 0 and res["updates_applied"] == 4 and res["y"] == [0.0] * 4
    stream.write_text("")
    res = json.loads(run(capsys, "sketch", "--transform", TINY, "--input", str(stream))[1])
    assert res == {"updates_applied": 0, "y": [0.0] * 4}
    stream.write_text("3 1.0\n")
    assert run(capsys, "sketch", "--transform", TINY, "--input", str(stream))[0] == 3
    stream.write_text("1 x\n")
    assert run(capsys, "sketch", "--transform", TINY, "--input", str(stream))[0] == 4


def test_sketch_shuffled_stream_matches_embed(tmp_path, capsys):
    desc = tmp_path / "t.json"
    run(capsys, "sample", "--epsilon", "0.5", "--delta", "0.1", "--d", "20", "--seed", "beef", "--output", str(desc))
    rng = random.Random(3)
    ups = [(rng.randint(1, 20), float(rng.randint(-4, 4))) for _ in range(200)]
    x = np.zeros(20)
    for j, v in ups:
        x[j - 1] += v
    rng.shuffle(ups)
    stream = tmp_path / "s.txt"
    stream.write_text("".join(f"{j} {v}\n" for j, v in ups))
    res = json.loads(run(capsys, "sketch", "--transform", str(desc), "--input", str(stream))[1])
    t = SparseJLTransform.from_descriptor(json.loads(desc.read_text()))
    assert res["y"] == t.apply(x).tolist()


def write_manifest(tmp_path, entries):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(entries))
    return str(path)


def test_verify_empty_manifest(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", write_manifest(tmp_path, []))
    assert code == 0 and json.loads(out) == []


def test_verify_passing_and_failing(tmp_path, capsys):
    entry = {"kind": "frobenius", "epsilon": 0.25, "delta": 0.05, "d": 4, "trials": 300, "name": "frob"}
    path = write_manifest(tmp_path, [entry])
    code, out, _ = run(capsys, "verify", path)
    report = json.loads(out)[0]
    assert code == 0 and report["pass"] and report["name"] == "frob"
    assert run(capsys, "verify", path)[1] == out
    bad = dict(entry, kind="operator", name="op")
    code, out, err = run(capsys, "verify", write_manifest(tmp_path, [entry, bad]))
    assert code == 5 and "op" in err
    assert [r["pass"] for r in json.loads(out)] == [True, False]


def test_verify_overrides_and_bad_entries(tmp_path, capsys):
    entry = {"kind": "distortion", "epsilon": 0.25, "delta": 0.05, "d": 4, "trials": 5000}
    code, out, _ = run(capsys, "verify", write_manifest(tmp_path, [entry]), "--trials", "50", "--rng-seed", "2")
    rep = json.loads(out)[0]
    assert rep["trials"] == 50 and rep["parameters"]["rng_seed"] == 2
    assert run(capsys, "verify", write_manifest(tmp_path, [{"epsilon": 0.1}]))[0] == 4
    assert run(capsys, "verify", write_manifest(tmp_path, [{"kind": "frobenius", "epsilon": "x", "delta": 0.1, "d": 2}]))[0] == 4
    assert run(capsys, "verify", write_manifest(tmp_path, {"a": 1}))[0] == 4
    zero = dict(entry, trials=0, name="zero")
    code, out, _ = run(capsys, "verify", write_manifest(tmp_path, [zero]))
    assert code == 5 and json.loads(out)[0]["degenerate"]


def test_manifest_overrides_parameters():
    rep = run_manifest_entry(
        {"kind": "eigenbound", "epsilon": 0.25, "delta": 0.05, "d": 16, "k": 64, "alpha": 16, "trials": 20}
    )
    assert rep.passed and rep.parameters["k"] == 64 and rep.parameters["D"] == 256


def test_crossover_table(capsys):
    code, out, _ = run(capsys, "crossover")
    assert code == 0 and out.startswith("| eps |") and "| yes |" in out


def test_parsers():
    assert parse_pairs("# c\n1 2\n\n3 -1.5\n", 3) == [(0, 2.0), (2, -1.5)]
    with pytest.raises(ShapeError):
        parse_pairs("0 1\n", 3)
    with pytest.raises(ParseError) as info:
        parse_pairs("1 2\n1 2 3\n")
    assert info.value.line == 2
    assert [r.tolist() for r in parse_dense_rows("1, 2\n3 4\n", 2)] == [[1.0, 2.0], [3.0, 4.0]]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sketchjl", "plan", "--epsilon", "0.25", "--delta", "0.05", "--d", "16"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["k"] == 277
    proc = subprocess.run([sys.executable, "-m", "sketchjl", "plan"], capture_output=True, text=True)
    assert proc.returncode == 2
