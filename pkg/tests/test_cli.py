"""Command-line entry points and exit codes."""

import csv

import pytest

from conipm.cli import main
from conipm.model import serialize_model

from _util import tiny_lp, infeasible_lp


def _write_model(tmp_path, model, name="model.txt"):
    path = tmp_path / name
    path.write_text(serialize_model(model))
    return str(path)


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["solve"]) == 1  # --model is required
    capsys.readouterr()


def test_solve_optimal_exits_zero(tmp_path, capsys):
    path = _write_model(tmp_path, tiny_lp())
    trace = str(tmp_path / "trace.csv")
    assert main(["solve", "--model", path, "--out", trace]) == 0
    out = capsys.readouterr().out
    assert "status: Optimal" in out
    assert "eps_feas" in out  # tolerance header is printed
    with open(trace, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and float(rows[-1]["mu"]) < float(rows[0]["mu"])


def test_solve_infeasible_is_a_success(tmp_path, capsys):
    path = _write_model(tmp_path, infeasible_lp())
    assert main(["solve", "--model", path]) == 0
    assert "PrimalInfeasible" in capsys.readouterr().out


def test_solve_missing_file_exits_one(tmp_path, capsys):
    assert main(["solve", "--model", str(tmp_path / "nope.txt")]) == 1
    capsys.readouterr()


def test_solve_iteration_limit_exits_two(tmp_path, capsys):
    path = _write_model(tmp_path, tiny_lp())
    assert main(["solve", "--model", path, "--max-iters", "1"]) == 2
    capsys.readouterr()


def test_gen_then_solve(tmp_path, capsys):
    path = str(tmp_path / "gen.txt")
    assert main(["gen", "--spec", "lp_random", "--seed", "3", "--out", path,
                 "--param", "n=6", "--param", "p=2", "--param", "q=9"]) == 0
    assert main(["solve", "--model", path]) == 0
    capsys.readouterr()


def test_gen_rejects_bad_param(tmp_path, capsys):
    assert main(["gen", "--spec", "lp_random", "--out", str(tmp_path / "x"),
                 "--param", "oops"]) == 1
    capsys.readouterr()


@pytest.mark.slow
def test_bench_and_profile_pipeline(tmp_path, capsys):
    out_dir = str(tmp_path / "bench")
    assert main(["bench", "--out", out_dir, "--modes", "basic,comb",
                 "--jobs", "2"]) == 0
    prof = str(tmp_path / "profile.csv")
    fig = str(tmp_path / "profile.png")
    assert main(["profile", "--in", out_dir, "--pair", "basic,comb",
                 "--out", prof, "--plot", fig]) == 0
    capsys.readouterr()
    with open(prof, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["mode"] for r in rows} == {"basic", "comb"}
    assert all(0.0 <= float(r["y_fraction"]) <= 1.0 for r in rows)
    assert (tmp_path / "profile.png").stat().st_size > 0


def test_profile_rejects_bad_pair(tmp_path, capsys):
    assert main(["profile", "--in", str(tmp_path), "--pair", "basic",
                 "--out", str(tmp_path / "p.csv")]) == 1
    capsys.readouterr()
