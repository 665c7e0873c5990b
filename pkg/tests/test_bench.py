"""Benchmark harness: metrics algebra, CSV round-trips, and determinism."""

import numpy as np
import pytest

from conipm.bench import (spec, generate, known_objective, default_suite,
                          shifted_geomean, perf_profile, run_one, RunRecord,
                          _aggregate, write_runs_csv, read_runs_csv)
from conipm.model import OPTIMAL
from conipm.solver import solve, SolverOptions


def test_shifted_geomean_hand_example():
    # sqrt((1+1)*(3+1)) - 1 = sqrt(8) - 1
    assert shifted_geomean([1.0, 3.0], 1.0) == pytest.approx(np.sqrt(8.0) - 1.0)
    assert shifted_geomean([5.0], 1.0) == pytest.approx(5.0)


def test_shifted_geomean_tolerates_large_spreads():
    vals = [1.0, 1e6]
    out = shifted_geomean(vals, 1.0)
    assert 1.0 < out < 1e6


def test_perf_profile_coordinates():
    curves = perf_profile({"a": [1.0, 2.0, 4.0], "b": [2.0, 2.0, 1.0]})
    # mode a is best on instances 0 and 1; ratios are log2(value/best)
    xa, ya = zip(*curves["a"])
    assert ya[-1] == pytest.approx(1.0)
    assert min(xa) == pytest.approx(0.0)
    xb, _ = zip(*curves["b"])
    assert max(xb) == pytest.approx(1.0)  # worst ratio for b is 2x = 1 doubling


def _rec(instance, mode, status, iters, ms):
    return RunRecord(instance, mode, status, iters, ms, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_aggregate_substitutes_failures():
    runs = [
        _rec("i1", "basic", OPTIMAL, 10, 10.0),
        _rec("i1", "comb", "Stalled", 50, 50.0),
        _rec("i2", "basic", OPTIMAL, 20, 20.0),
        _rec("i2", "comb", OPTIMAL, 5, 5.0),
    ]
    rows = {(r["mode"], r["set"]): r for r in _aggregate(runs, ["basic", "comb"])}
    # "every": only i2, where both modes converged
    assert rows[("basic", "every")]["iters_sgm"] == pytest.approx(20.0 + 1 - 1)
    assert rows[("comb", "every")]["iters_sgm"] == pytest.approx(5.0)
    # "all": failed comb run on i1 counts as twice the converged peer value
    assert rows[("comb", "all")]["iters_sgm"] == pytest.approx(
        np.sqrt((2 * 10.0 + 1) * (5.0 + 1)) - 1.0)
    assert rows[("basic", "all")]["iters_sgm"] == pytest.approx(
        np.sqrt((10.0 + 1) * (20.0 + 1)) - 1.0)
    assert rows[("comb", "this")]["conv"] == 1


def test_runs_csv_roundtrip(tmp_path):
    runs = [_rec("i1", "basic", OPTIMAL, 10, 12.5),
            _rec("i2", "comb", "Stalled", 3, 0.125)]
    path = str(tmp_path / "runs.csv")
    write_runs_csv(path, runs)
    back = read_runs_csv(path)
    assert back == runs


def test_default_suite_covers_every_cone():
    tags = set()
    for s in default_suite():
        for cone in generate(s).cones:
            tags.add(cone.tag)
    assert tags >= {"NONNEG", "PSD", "LINF", "L2", "SQR", "GPOWER",
                    "POWER", "GEOM", "LOG", "LMI", "WSOS"}


def test_instance_names_are_deterministic():
    a = spec("lp_random", 7, n=8, p=2, q=12)
    b = spec("lp_random", 7, n=8, p=2, q=12)
    assert a.name == b.name
    m1, m2 = generate(a), generate(b)
    assert np.array_equal(m1.c, m2.c) and np.array_equal(m1.G, m2.G)


def test_lp_known_objective_matches_solver():
    s = spec("lp_random", 3, n=6, p=2, q=9)
    ref = known_objective(s)
    assert ref is not None
    res = solve(generate(s), SolverOptions())
    assert res.status == OPTIMAL
    assert res.primal_objective == pytest.approx(ref, rel=1e-6, abs=1e-6)


def test_run_one_is_repeatable():
    s = spec("portfolio", 5, d=6)
    r1 = run_one(s, "comb")
    r2 = run_one(s, "comb")
    assert (r1.status, r1.iters) == (r2.status, r2.iters)
