import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import lasso_1d
from rlsd.bench import BenchSpec, generate
from rlsd.bundle import write_problem
from rlsd.cli import RunManifest, main
from rlsd.errors import InvalidInputError
from rlsd.problem import RlsdProblem
from rlsd.regularizers import StronglyConvexSmooth

SMALL = {
    "spcp": ["--m", "8", "--n", "6"],
    "background": ["--m", "8", "--n", "6"],
    "lasso": ["--n", "20", "--p", "8"],
    "cpcp": ["--m", "8", "--n", "8", "--density", "0.6"],
}


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def run(*args):
    return main([str(a) for a in args])


def test_lasso_1d_solve(tmp_path):
    manifest = write_problem(lasso_1d(), tmp_path / "l1d")
    assert run("solve", manifest, "--gamma", 2, "--tol", 1e-10) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] == "Converged" and summary["gamma"] == 2.0
    assert abs(summary["objective"] - 2.5) <= 1e-8
    header = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert header.startswith("k,objective,lagrangian")


def test_solve_error_codes(tmp_path, capsys):
    assert run("solve", tmp_path / "nope.json", "--gamma", 1) == 1
    assert "error" in capsys.readouterr().err
    run("bench", "spcp", *SMALL["spcp"], "--out", "b")
    assert run("solve", "b/problem.json", "--gamma", 1, "--max-iter", 1) == 2
    assert run("solve", "b/problem.json", "--gamma", -1) == 1
    assert run("solve", "b/problem.json", "--gamma", 1, "--trace", "b/problem.json") == 1


@pytest.mark.parametrize("family", sorted(SMALL))
@pytest.mark.parametrize("gamma", [0.3, 0.8, 2.0])
def test_round_trip(family, gamma, tmp_path):
    out = tmp_path / family
    assert run("bench", family, *SMALL[family], "--seed", 3, "--out", out) == 0
    assert (out / "truth.json").exists()
    problem = out / "problem.json"
    assert run("solve", problem, "--gamma", gamma, "--max-iter", 20000) == 0
    code = run("certify", problem, "--trace", "trace.csv", "--gamma", gamma,
               "--compute-reference")
    cert = json.loads((tmp_path / "certificate.json").read_text())
    if family == "cpcp":
        assert code == 5 and cert["regime"] == "Uncertified"
        assert cert["empirical"]["converged"]
    else:
        assert code == 0
        assert all(c["pass"] for c in cert["checks"])
        assert cert["regime"] == ("High" if gamma > 1 else "Mid" if gamma > 0.5 else "Low")
        assert (cert["reference"] is None) == (gamma > 1)


def test_certify_needs_reference(tmp_path, capsys):
    run("bench", "lasso", *SMALL["lasso"], "--out", "b")
    run("solve", "b/problem.json", "--gamma", 0.8)
    assert run("certify", "b/problem.json", "--trace", "trace.csv", "--gamma", 0.8) == 1
    assert "--compute-reference" in capsys.readouterr().err
    assert run("certify", "b/problem.json", "--trace", "trace.csv", "--gamma", 0.8,
               "--compute-reference") == 0
    assert (tmp_path / "b" / "reference.json").exists()
    assert run("certify", "b/problem.json", "--trace", "trace.csv", "--gamma", 0.8,
               "--reference", "b/reference.json", "--certificate", "c2.json") == 0


def test_certify_corrupted_trace(tmp_path, capsys):
    run("bench", "spcp", *SMALL["spcp"], "--out", "b")
    run("solve", "b/problem.json", "--gamma", 2)
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[2] = repr(float(cells[2]) + 1.0)
    lines[5] = ",".join(cells)
    (tmp_path / "trace.csv").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert run("certify", "b/problem.json", "--trace", "trace.csv", "--gamma", 2) == 4
    assert "descent" in capsys.readouterr().err
    cert = json.loads((tmp_path / "certificate.json").read_text())
    bad = [c for c in cert["checks"] if not c["pass"]]
    assert bad[0]["name"] == "descent" and bad[0]["at_iteration"] == 4


def test_certify_general_third_block_uncertified(tmp_path):
    base, _ = generate(BenchSpec("spcp", m=8, n=6, seed=1))
    q = 0.05 * np.random.default_rng(0).standard_normal(base.dim)
    p = RlsdProblem(base.block1, base.block2, base.b,
                    StronglyConvexSmooth(np.eye(base.dim), q, 1.0, 1.0))
    manifest = write_problem(p, tmp_path / "quad")
    assert run("solve", manifest, "--gamma", 0.6, "--max-iter", 20000) == 0
    assert run("certify", manifest, "--trace", "trace.csv", "--gamma", 0.6) == 5
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["regime"] == "Uncertified" and cert["empirical"]["converged"]


def test_gamma_range(capsys, tmp_path):
    assert run("gamma-range", 1, 1, 3, 4) == 0
    assert capsys.readouterr().out.strip() == "(0,0.5)∪(0.7321,+inf)"
    assert run("gamma-range", 500, 505, 3.9, 6, "--output", "r.json") == 0
    assert capsys.readouterr().out.strip() == "(0,+inf)"
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["display"] == "(0,+inf)" and d["range"][0]["hi"] == "inf"
    assert run("gamma-range", 1, 1, 2, 4) == 1


def test_bench_commands(tmp_path):
    args = ["bench", "spcp", "--m", 30, "--n", 30, "--rank", 2, "--sparsity", 0.05, "--seed", 7]
    assert run(*args, "--out", "x") == 0 and run(*args, "--out", "y") == 0
    for f in (tmp_path / "x").iterdir():
        assert f.read_bytes() == (tmp_path / "y" / f.name).read_bytes()
    assert run("bench", "lasso", "--n", 50, "--p", 20, "--seed", 1) == 0
    assert (tmp_path / "lasso_seed1" / "problem.json").exists()
    assert run("bench", "cpcp", "--density", 0) == 1
    assert run("bench", "lasso", "--n", 5, "--p", 20) == 1


def test_run_manifest_validation(tmp_path):
    with pytest.raises(InvalidInputError):
        RunManifest(tmp_path / "p.json", 0.0)
    with pytest.raises(InvalidInputError):
        RunManifest(tmp_path / "p.json", 1.0, trace=tmp_path / "t", summary=tmp_path / "t")
    with pytest.raises(InvalidInputError):
        RunManifest(tmp_path / "p.json", 1.0, reference_policy="load")


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "rlsd", "gamma-range", "2", "2.1", "3.5", "6.5"],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0 and out.stdout.strip() == "(0,+inf)"


def test_backend_flag(tmp_path):
    from rlsd import kernels

    original = kernels.BACKEND
    try:
        assert run("--backend", "python", "gamma-range", 1, 1, 3, 4) == 0
        assert kernels.BACKEND == "python"
    finally:
        kernels.set_backend(original)
