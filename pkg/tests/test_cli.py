import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from infstart.cli import dump_problem, main, parse_problem
from infstart.errors import FormatError
from infstart.model import PrimalDualTriple
from problems import soc_suite, tiny_lp

TINY = """format_version: 1
cone:
  - {type: nonneg, dim: 2}
A: [[1.0, 1.0]]
b: [1.0]
c: [1.0, 0.0]
"""


@pytest.fixture
def tiny_file(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY)
    return p


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_tiny(tiny_file, capsys):
    code, out, _ = run(["solve", "--input", tiny_file, "--epsilon", "1e-3", "--method", "damped"], capsys)
    assert code == 0
    rep = yaml.safe_load(out)
    assert rep["format_version"] == 1 and rep["status"] == "converged"
    assert rep["gap"] == pytest.approx(1e-3, abs=1e-9)
    # f* = 0 from vertex enumeration
    assert 0 <= rep["solution"]["x"][0] <= 1e-3


def test_bad_cone_type(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text(TINY.replace("nonneg", "psd"))
    code, _, err = run(["solve", "--input", p, "--epsilon", "1e-3"], capsys)
    assert code == 4
    assert "cone[0].type" in err and "line 3" in err


def test_zero_epsilon(tiny_file, capsys):
    code, _, err = run(["solve", "--input", tiny_file, "--epsilon", "0"], capsys)
    assert code == 4 and "epsilon must be positive" in err


@pytest.mark.parametrize(
    "text,field",
    [
        (TINY.replace("format_version: 1", "format_version: 2"), "format_version"),
        (TINY.replace("b: [1.0]", "b: [1.0, 2.0]"), "b"),
        (TINY.replace("c: [1.0, 0.0]", "c: [1.0, x]"), "c[1]"),
        (TINY.replace("dim: 2", "dim: 0"), "cone[0].dim"),
        (TINY + "extra: 1\n", "extra"),
    ],
)
def test_parse_errors_name_field(text, field):
    with pytest.raises(FormatError) as exc:
        parse_problem(text)
    assert exc.value.field == field
    assert exc.value.line is not None


def test_missing_field():
    with pytest.raises(FormatError) as exc:
        parse_problem(TINY.replace("c: [1.0, 0.0]\n", ""))
    assert exc.value.field == "c"


def test_rank_deficient_is_input_error(tmp_path, capsys):
    p = tmp_path / "rd.yaml"
    p.write_text(TINY.replace("c: [1.0, 0.0]", "c: [2.0, 2.0]"))
    code, _, _ = run(["solve", "--input", p, "--epsilon", "1e-3"], capsys)
    assert code == 4


def test_problem_roundtrip():
    prob = soc_suite()[1]
    hot = PrimalDualTriple(prob.cone.unit(), prob.cone.unit(), np.arange(prob.m) / 3.0)
    back, hot2, xb = parse_problem(dump_problem(prob, hot, prob.cone.unit() * 1.1))
    assert back.cone == prob.cone
    assert np.array_equal(back.A, prob.A) and np.array_equal(back.b, prob.b) and np.array_equal(back.c, prob.c)
    assert np.array_equal(hot2.y, hot.y) and np.array_equal(xb, prob.cone.unit() * 1.1)


def test_report_is_deterministic_and_exact(tiny_file, tmp_path, capsys):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.yaml"
        code, _, _ = run(["solve", "--input", tiny_file, "--epsilon", "1e-3", "--method", "path", "--output", out], capsys)
        assert code == 0
        doc = yaml.safe_load(out.read_text())
        doc.pop("wall_time")
        outs.append(doc)
    assert outs[0] == outs[1]
    from infstart.solvers import SolverOptions, solve

    rep = solve(tiny_lp(), 1e-3, SolverOptions(method="path"))
    assert outs[0]["solution"]["x"] == rep.recovered.x.tolist()
    assert outs[0]["gap"] == rep.residuals.gap


def test_trace_and_hot_start(tmp_path, capsys):
    from infstart.solvers import solve

    prob = tiny_lp()
    sol = solve(prob, 1e-3).recovered
    p = tmp_path / "hot.yaml"
    p.write_text(dump_problem(prob, sol))
    trace = tmp_path / "trace.jsonl"
    code, out, _ = run(["solve", "--input", p, "--epsilon", "1e-3", "--method", "path", "--hot-start", "--trace", trace], capsys)
    assert code == 0
    recs = [json.loads(line) for line in trace.read_text().splitlines()]
    rep = yaml.safe_load(out)
    assert len(recs) >= rep["iterations"]["total"] and recs[0]["k"] == 0
    assert rep["iterations"]["total"] <= 10


def test_hot_start_flag_without_data(tiny_file, capsys):
    code, _, err = run(["solve", "--input", tiny_file, "--epsilon", "1e-3", "--hot-start"], capsys)
    assert code == 4 and "hot_start" in err


def test_iteration_limit_exit_code(tiny_file, capsys):
    code, out, _ = run(["solve", "--input", tiny_file, "--epsilon", "1e-6", "--max-iters", "2"], capsys)
    assert code == 2
    assert yaml.safe_load(out)["status"] == "iteration_limit"


def test_diagnostics_flag(tiny_file, capsys):
    code, out, _ = run(["solve", "--input", tiny_file, "--epsilon", "1e-3", "--diagnostics"], capsys)
    rep = yaml.safe_load(out)
    assert code == 0
    assert rep["measured"]["sigma"] >= 1 and rep["bound_ledger"]["path_bound"] > 0


def test_output_dir_env(tiny_file, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("INFSTART_OUTPUT_DIR", str(tmp_path / "out"))
    code, out, _ = run(["solve", "--input", tiny_file, "--epsilon", "1e-2"], capsys)
    assert code == 0 and out == ""
    assert (tmp_path / "out" / "tiny.report.yaml").exists()


@pytest.mark.parametrize(
    "suite,extra",
    [
        ("barrier-identities", ["--count", "50"]),
        ("hessian-bounds", ["--cone", "soc:4"]),
        ("hessian-bounds", ["--cone", "nonneg:3,soc:3"]),
        ("central-path", []),
        ("bound-ledger", []),
    ],
)
def test_diagnostics_suites(suite, extra, capsys):
    code, out, err = run(["diagnostics", "--suite", suite, "--seed", "7", *extra], capsys)
    assert code == 0, err
    assert yaml.safe_load(out)["violations"] == 0


def test_bad_flag_is_input_error(capsys):
    assert main(["solve", "--epsilon", "1e-3"]) == 4
    assert main(["diagnostics", "--suite", "nope"]) == 4
    capsys.readouterr()


def test_module_entry_point(tiny_file):
    res = subprocess.run(
        [sys.executable, "-m", "infstart", "solve", "--input", str(tiny_file), "--epsilon", "1e-2"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and "converged" in res.stdout
