import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from drso.cli import main, run_suite
from drso.core import AmbiguityBall, CentralDistribution, ScenarioMetric
from drso.instance_io import dump_instance, load_instance
from drso.problems import vc3, vc3_center


@pytest.fixture
def vc3_file(tmp_path):
    ball = AmbiguityBall(CentralDistribution.from_explicit(vc3_center()), 0.25, "wasserstein", ScenarioMetric.discrete())
    path = tmp_path / "vc3.json"
    path.write_text(dump_instance(vc3(), ball))
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def records(text):
    return [json.loads(line) for line in text.splitlines()]


def test_gen_is_deterministic(tmp_path, capsys):
    a = run(["gen", "vertex_cover", "--size", "n=3", "--seed", 1], capsys)[1]
    b = run(["gen", "vertex_cover", "--size", "n=3", "--seed", 1], capsys)[1]
    assert a == b
    assert run(["gen", "vertex_cover", "--size", "n=3", "--seed", 2], capsys)[1] != a


def test_gen_facility_location_metric(tmp_path, capsys):
    path = tmp_path / "fl.json"
    for seed in range(10):
        assert run(["gen", "facility_location", "--seed", seed, "--out", path], capsys)[0] == 0
        D = np.array(json.loads(path.read_text())["ground"]["distances"])
        n = len(D)
        for a in range(n):
            assert np.all(D <= D[:, [a]] + D[[a], :] + 1e-9)


def test_gen_steiner_root(tmp_path, capsys):
    path = tmp_path / "st.json"
    run(["gen", "steiner", "--size", "n=5", "--out", path], capsys)
    doc = json.loads(path.read_text())
    D = np.array(doc["ground"]["distances"])
    assert D.shape == (5, 5) and doc["problem"]["root"] == 0
    assert np.all(D[~np.eye(5, dtype=bool)] > 0)
    assert load_instance(path).problem.root == 0


def test_solve_vc3_collapsible_exact(vc3_file, capsys):
    code, out, _ = run(["solve", vc3_file, "--method", "collapsible-lp", "--exact"], capsys)
    assert code == 0
    recs = records(out)
    sol = next(r for r in recs if r["record"] == "solution")
    ex = next(r for r in recs if r["record"] == "exact")
    assert sol["value"] == pytest.approx(2.75)
    assert ex["ratio"] == pytest.approx(1.0)
    code, out, _ = run(["solve", vc3_file, "--method", "collapsible-lp", "--exact", "--format", "csv"], capsys)
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["value"] == "2.75" and row["ratio"] == "1.00"


@pytest.mark.parametrize("method", ["saa-ellipsoid", "collapsible-lp", "setcover-special"])
def test_solve_at_zero_radius(tmp_path, capsys, method):
    path = tmp_path / "vc.json"
    run(["gen", "vertex_cover", "--seed", 4, "--r", 0, "--out", path], capsys)
    code, out, _ = run(["solve", path, "--method", method, "--exact", "--format", "csv"], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    rho = load_instance(path).problem.rho
    assert float(row["ratio"]) <= rho * 1.1 + 0.005


def test_solve_records_carry_seed(vc3_file, capsys):
    out = run(["solve", vc3_file, "--seed", 9, "--samples", 50, "--replicates", 2], capsys)[1]
    for rec in records(out)[1:]:
        assert rec["seed"] is not None


def test_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"ground": {\n')
    code, _, err = run(["solve", bad], capsys)
    assert code == 2 and "parse error" in err


def test_missing_field_names_it(tmp_path, vc3_file, capsys):
    doc = json.loads(vc3_file.read_text())
    del doc["ball"]["r"]
    bad = tmp_path / "nor.json"
    bad.write_text(json.dumps(doc, indent=2))
    code, _, err = run(["solve", bad], capsys)
    assert code == 2 and "ball.r" in err


def test_empty_suite_is_usage_error():
    proc = subprocess.run([sys.executable, "-m", "drso.cli", "experiment"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr


def test_acceptance_suite_exit_zero(capsys):
    code, out, _ = run(["experiment", "acceptance", "--trials", 1], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 10 and all(r["ok"] == "True" for r in rows)


def test_kmaxmin_bench_within_six():
    rows = run_suite("kmaxmin-bench", 50)
    assert len(rows) == 50
    assert all(r["ok"] and float(r["ratio"]) <= 6 for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "{file}", "--samples", "40", "--replicates", "3", "--seed", "5"],
        ["solve", "{file}", "--method", "collapsible-lp", "--exact", "--format", "csv"],
        ["solve", "{file}", "--method", "linfty", "--seed", "2"],
        ["experiment", "kmaxmin-bench", "--trials", "5"],
    ],
)
def test_byte_identical_reruns(vc3_file, capsys, argv):
    argv = [a.replace("{file}", str(vc3_file)) for a in argv]
    first = run(argv, capsys)
    second = run(argv, capsys)
    assert first == second
