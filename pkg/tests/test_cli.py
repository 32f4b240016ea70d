import json
import subprocess
import sys

import numpy as np
import pytest

from ricsense import cli
from ricsense.corpus import load_fixture
from ricsense.io import dumps, load_json
from ricsense.errors import ValidationError
from ricsense.linalg import matrix_to_json


@pytest.fixture
def example1_files(tmp_path):
    fx = load_fixture(1)
    sys_path = tmp_path / "system.json"
    pert_path = tmp_path / "perturb.json"
    sys_path.write_text(json.dumps(fx.system.to_json()))
    pert_path.write_text(json.dumps({"deltaA": matrix_to_json(fx.deltaA)}))
    return sys_path, pert_path


def run(*args):
    return cli.main([str(a) for a in args])


def test_analyze_example1(example1_files, tmp_path):
    s, p = example1_files
    out = tmp_path / "report.json"
    assert run("analyze", "--input", s, "--perturb", p, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["sep"] == pytest.approx(4.0e-5, rel=0.1)
    assert rep["destabilization"]["verdict"] == "unstable"
    assert rep["coupling_radius"]["upper"] <= 0.1
    assert rep["sensitivity"]["frobenius_bound"] > 0


def test_analyze_zero_perturbation(example1_files, tmp_path):
    s, _ = example1_files
    p = tmp_path / "zero.json"
    p.write_text(json.dumps({"deltaA": matrix_to_json(np.zeros((3, 3)))}))
    out = tmp_path / "r.json"
    assert run("analyze", "--input", s, "--perturb", p, "--out", out) == 0
    rep = json.loads(out.read_text())
    sens = rep["sensitivity"]
    assert sens["frobenius_bound"] == 0 and sens["nonlocal_bound"] == 0
    assert all(v in (None, 0) for row in sens["blockwise_bounds"] for v in row)
    assert rep["destabilization"]["verdict"] == "stable"


def test_malformed_json_exit2_no_output(tmp_path, example1_files, capsys):
    _, p = example1_files
    bad = tmp_path / "bad.json"
    bad.write_text('{"A": {"rows": 1,\n "cols": 1 "data": [1]}}')
    out = tmp_path / "never.json"
    assert run("analyze", "--input", bad, "--perturb", p, "--out", out) == 2
    assert not out.exists()
    assert "bad.json:2:" in capsys.readouterr().err


def test_dimension_mismatch_exit2(tmp_path, example1_files):
    s, _ = example1_files
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"deltaA": matrix_to_json(np.zeros((2, 2)))}))
    assert run("analyze", "--input", s, "--perturb", p) == 2


def test_numerical_failure_exit3(tmp_path):
    sysj = {
        "A": {"rows": 2, "cols": 2, "data": [1, 0, 0, -1]},
        "B": {"rows": 2, "cols": 1, "data": [0, 1]},
        "Q": {"rows": 2, "cols": 2, "data": [1, 0, 0, 1]},
        "R": {"rows": 1, "cols": 1, "data": [1]},
    }
    s = tmp_path / "s.json"
    s.write_text(json.dumps(sysj))
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"deltaA": matrix_to_json(np.zeros((2, 2)))}))
    out = tmp_path / "o.json"
    assert run("analyze", "--input", s, "--perturb", p, "--out", out) == 3
    assert not out.exists()


def test_unknown_example_exit2():
    with pytest.raises(SystemExit) as ei:
        run("example", "7")
    assert ei.value.code == 2


def test_example_text_table(capsys):
    assert run("example", "3", "--format", "text") == 0
    out = capsys.readouterr().out
    assert "Example 3" in out and "[PASS] sep" in out


def test_scaling_ratios(tmp_path):
    out = tmp_path / "s.json"
    assert run("scaling", "--k", "1,4,9", "--out", out) == 0
    rows = json.loads(out.read_text())["rows"]
    got = [(r["frobenius_ratio"], r["blockwise_ratio"]) for r in rows]
    assert np.allclose(got, [(1, 1), (2, 1), (3, 1)], rtol=1e-9)


def test_stability_commands(tmp_path, capsys):
    a = tmp_path / "a.json"
    a.write_text("[[-2.0]]")
    assert run("stability", "radius", "--input", a) == 0
    assert json.loads(capsys.readouterr().out)["radius"] == pytest.approx(2.0)
    assert run("stability", "sep", "--input", a, "--kind", "discrete") == 0
    assert json.loads(capsys.readouterr().out)["sep"] == pytest.approx(3.0)
    a.write_text("[[0.5]]")
    assert run("stability", "radius", "--input", a) == 2


def test_ovf_csv_and_svg(tmp_path):
    out = tmp_path / "v.csv"
    assert run("ovf", "--coupled", "--grid", "12", "--controls", "3", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x1,x2,V" and len(lines) == 1 + 144
    svg = (tmp_path / "v.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_ovf_comparison_report(tmp_path):
    out = tmp_path / "cmp.json"
    assert run("ovf", "--grid", "12", "--controls", "3", "--out", out) == 0
    rep = json.loads(out.read_text())
    assert {"relative_l2", "relative_sup", "additive_fit_error"} <= rep.keys()
    assert (tmp_path / "cmp_coupled.svg").exists() and (tmp_path / "cmp_uncoupled.svg").exists()


@pytest.mark.parametrize(
    "args",
    [
        ("example", "1"),
        ("scaling", "--k", "1,4"),
        ("ovf", "--uncoupled", "--grid", "10", "--controls", "3", "--format", "json"),
    ],
)
def test_byte_identical_outputs(tmp_path, args):
    a, b = tmp_path / "a.out", tmp_path / "b.out"
    assert run(*args, "--out", a) == 0
    assert run(*args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_env_override(monkeypatch):
    args = cli.build_parser().parse_args(["analyze", "--input", "x", "--perturb", "y", "--seed", "5"])
    assert cli._seed(args) == 5
    monkeypatch.setenv("RICSENSE_SEED", "17")
    assert cli._seed(args) == 17
    monkeypatch.setenv("RICSENSE_SEED", "abc")
    with pytest.raises(ValidationError):
        cli._seed(args)


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "ricsense.cli", "example", "2"], capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["id"] == 2


def test_dumps_format():
    text = dumps({"a": 0.1, "b": float("inf"), "c": -0.0, "d": [1, 2], "e": np.float64(1 / 3)})
    assert '"a": 0.10000000000000001' in text
    assert '"b": null' in text and '"c": 0' in text
    assert json.loads(text)["e"] == 1 / 3


def test_load_json_reports_location(tmp_path):
    f = tmp_path / "x.json"
    f.write_text("{\n  \"a\": ,\n}")
    with pytest.raises(ValidationError, match=r"x.json:2:8"):
        load_json(f)
    with pytest.raises(ValidationError):
        load_json(tmp_path / "missing.json")
