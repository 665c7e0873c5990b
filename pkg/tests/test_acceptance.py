"""End-to-end acceptance checks.

Nine gates, each pinned to an exact tolerance or trend; none may be
loosened.  Together they cover the cone oracles, the proximity lemma,
the unit starting point, direction correctness against a dense
reference, certificates, the stepping-mode efficiency ordering, the
third-order-versus-assembly cost trend, trajectory algebra, and
benchmark reproducibility.
"""

import time

import numpy as np
import pytest

from conipm.bench import default_suite, generate, run_one
from conipm.cones import Nonneg, PsdSvec, random_interior_point
from conipm.kkt import KktFactorization, Direction, dense_solve
from conipm.model import (build_model, OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE)
from conipm.preprocess import (preprocess, InconsistencyReport, initial_iterate,
                               mu_of, Iterate)
from conipm.solver import solve, SolverOptions
from conipm.stepper import (MODES, prox_lower_bounds, proximities,
                            rhs_centering, rhs_prediction,
                            rhs_centering_adj, rhs_prediction_adj,
                            line_candidate, curve_candidate, comb_candidate)
from conipm.bench import run_suite

from _util import cone_zoo, fd_step, tiny_lp, infeasible_lp, unbounded_lp, mixed_model


# -- 1. oracle suite ---------------------------------------------------------

def test_oracle_suite_200_points_per_cone():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    for cone in cone_zoo(rng):
        for _ in range(200):
            s = random_interior_point(cone, rng)
            g = cone.gradient(s)
            nu = cone.nu
            # barrier identities
            assert abs(-float(s @ g) - nu) <= 1e-9 * nu
            assert abs(cone.inv_hess_quad(s, g) - nu) <= 1e-7 * nu
            # Hessian against gradient differences
            d = rng.standard_normal(cone.dim)
            h = fd_step(cone, s, d)
            ref = (cone.clone().gradient(s + h * d)
                   - cone.clone().gradient(s - h * d)) / (2 * h)
            hd = cone.hessian_apply(s, d)
            assert np.max(np.abs(hd - ref)) / max(1.0, np.max(np.abs(hd))) < 1e-4
            # third-order term against Hessian differences
            t_ref = -0.5 * (cone.clone().hessian_apply(s + h * d, d)
                            - cone.clone().hessian_apply(s - h * d, d)) / (2 * h)
            t = cone.too(s, d)
            assert np.max(np.abs(t - t_ref)) / max(1.0, np.max(np.abs(t))) < 1e-3
            # quadratic homogeneity of the third-order term
            t2 = cone.too(s, 2.0 * d)
            assert np.max(np.abs(t2 - 4.0 * t)) <= \
                1e-12 * max(1e-300, np.max(np.abs(4.0 * t)))
    assert time.perf_counter() - t0 < 60.0


# -- 2. proximity lower-bound lemma ------------------------------------------

def _zoo_embedding(rng):
    cones = cone_zoo(rng)
    q = sum(c.dim for c in cones)
    m = build_model(np.ones(q), np.zeros((0, q)), np.zeros(0),
                    -np.eye(q), np.zeros(q), cones)
    return preprocess(m)


def test_proximity_lower_bound_1000_points():
    rng = np.random.default_rng(202)
    pre = _zoo_embedding(rng)
    for _ in range(1000):
        s = np.empty(pre.q)
        for off, cone in zip(pre.cone_offsets, pre.cones):
            s[off:off + cone.dim] = random_interior_point(cone.clone(), rng)
        it = Iterate(np.zeros(pre.n), rng.standard_normal(pre.q),
                     float(rng.uniform(0.1, 2.0)), s, float(rng.uniform(0.1, 2.0)))
        mu = float(rng.uniform(1e-3, 10.0))
        rho = prox_lower_bounds(pre, it, mu)
        pi = proximities(pre, it, mu)
        assert np.all(rho <= pi + 1e-12)


def test_proximity_equality_one_dimensional():
    m = build_model(np.array([1.0]), np.zeros((0, 1)), np.zeros(0),
                    np.array([[-1.0]]), np.array([0.0]), [Nonneg(1)])
    pre = preprocess(m)
    it = Iterate(np.zeros(pre.n), np.array([2.0]), 1.0, np.array([1.0]), 0.0)
    rho, pi = prox_lower_bounds(pre, it, 1.0), proximities(pre, it, 1.0)
    assert abs(rho[0] - 1.0) <= 1e-12
    assert abs(pi[0] - 1.0) <= 1e-12


# -- 3. unit starting point ---------------------------------------------------

def test_starting_point_complementarity_is_one_everywhere():
    for sp in default_suite():
        pre = preprocess(generate(sp))
        if isinstance(pre, InconsistencyReport):
            continue
        it = initial_iterate(pre)
        assert abs(mu_of(pre, it) - 1.0) <= 1e-12, sp.name


# -- 4. structured directions match a dense reference -------------------------

def _close(d1, d2, tol=1e-8):
    for a, b in [(d1.dx, d2.dx), (d1.dz, d2.dz), ([d1.dtau], [d2.dtau]),
                 (d1.ds, d2.ds), ([d1.dkappa], [d2.dkappa])]:
        a, b = np.asarray(a), np.asarray(b)
        assert np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))) < tol


def _small_instances():
    out = []
    for sp in default_suite():
        pre = preprocess(generate(sp))
        if isinstance(pre, InconsistencyReport):
            continue
        if pre.n + 2 * pre.q + 2 <= 60:
            out.append((sp.name, pre))
    rng = np.random.default_rng(303)
    for dual in (False, True):
        pre = preprocess(mixed_model(rng, dual=dual))
        out.append((f"mixed-dual={dual}", pre))
    return out


def test_directions_match_dense_solve_all_rhs_types():
    cases = _small_instances()
    assert cases, "no instance small enough for the dense reference"
    for name, pre in cases:
        it = initial_iterate(pre)
        mu = mu_of(pre, it)
        kkt = KktFactorization(pre, it, mu)
        d_cent = kkt.solve(rhs_centering(pre, it, mu))
        d_pred = kkt.solve(rhs_prediction(pre, it))
        for rhs in (rhs_centering(pre, it, mu),
                    rhs_prediction(pre, it),
                    rhs_centering_adj(pre, it, mu, d_cent),
                    rhs_prediction_adj(pre, it, mu, d_pred)):
            _close(kkt.solve(rhs), dense_solve(pre, it, mu, rhs))


# -- 5. certificates -----------------------------------------------------------

def test_certificates_under_every_mode():
    t0 = time.perf_counter()
    for mode in MODES:
        res = solve(tiny_lp(), SolverOptions(stepper=mode))
        assert res.status == OPTIMAL
        assert abs(res.primal_objective - 1.0) <= 1e-7, mode
    res = solve(infeasible_lp(), SolverOptions())
    assert res.status == PRIMAL_INFEASIBLE and res.certificate.valid
    res = solve(unbounded_lp(), SolverOptions())
    assert res.status == DUAL_INFEASIBLE and res.certificate.valid
    assert time.perf_counter() - t0 < 5.0


# -- 6. stepping-mode efficiency ordering --------------------------------------

@pytest.mark.slow
def test_stepping_mode_iteration_trend():
    t0 = time.perf_counter()
    table = run_suite(default_suite(), modes=list(MODES), jobs=2)
    sgm = {row["mode"]: row["iters_sgm"] for row in table.aggregates
           if row["set"] == "every"}
    assert sgm["prox"] < sgm["basic"]
    assert sgm["toa"] < sgm["prox"]
    assert sgm["comb"] < sgm["curve"]
    assert sgm["comb"] <= 0.6 * sgm["basic"]
    assert time.perf_counter() - t0 < 600.0


# -- 7. third-order term beats Hessian assembly --------------------------------

@pytest.mark.slow
def test_third_order_cheaper_than_hessian_assembly():
    rng = np.random.default_rng(404)
    cone = PsdSvec(60)
    t_too, t_hess = 0.0, 0.0
    for _ in range(20):
        s = random_interior_point(cone, rng)
        d = rng.standard_normal(cone.dim)
        c1 = cone.clone()
        c1.gradient(s)  # shared point setup outside both timers
        t0 = time.perf_counter()
        c1.too(s, d)
        t_too += time.perf_counter() - t0
        c2 = cone.clone()
        c2.gradient(s)
        t0 = time.perf_counter()
        c2.hessian(s)
        t_hess += time.perf_counter() - t0
    assert t_hess >= 1.5 * t_too


# -- 8. trajectory identities ---------------------------------------------------

def _one_ulp(a, b):
    a = np.atleast_1d(np.asarray(a, float))
    b = np.atleast_1d(np.asarray(b, float))
    assert np.all(np.abs(a - b) <= np.spacing(np.maximum(np.abs(a), np.abs(b))))


def test_trajectory_endpoint_identities():
    rng = np.random.default_rng(505)
    pre = preprocess(mixed_model(rng))
    it = initial_iterate(pre)
    mu = mu_of(pre, it)
    kkt = KktFactorization(pre, it, mu)
    dc = kkt.solve(rhs_centering(pre, it, mu))
    dca = kkt.solve(rhs_centering_adj(pre, it, mu, dc))
    dp = kkt.solve(rhs_prediction(pre, it))
    dpa = kkt.solve(rhs_prediction_adj(pre, it, mu, dp))
    cand = comb_candidate(it, dp, dpa, dc, dca)
    hi, lo = cand(1.0), cand(0.0)
    for got, want in [
        (hi.x, it.x + dp.dx + dpa.dx), (hi.z, it.z + dp.dz + dpa.dz),
        (hi.s, it.s + dp.ds + dpa.ds), (hi.tau, it.tau + dp.dtau + dpa.dtau),
        (hi.kappa, it.kappa + dp.dkappa + dpa.dkappa),
        (lo.x, it.x + dc.dx + dca.dx), (lo.z, it.z + dc.dz + dca.dz),
        (lo.s, it.s + dc.ds + dca.ds), (lo.tau, it.tau + dc.dtau + dca.dtau),
        (lo.kappa, it.kappa + dc.dkappa + dca.dkappa),
    ]:
        _one_ulp(got, want)
    zero = Direction(np.zeros(pre.n), np.zeros(pre.q), 0.0, np.zeros(pre.q), 0.0)
    curve, line = curve_candidate(it, dp, zero), line_candidate(it, dp)
    for a in (1.0, 0.25, 0.001):
        p, q = curve(a), line(a)
        assert np.array_equal(p.x, q.x) and np.array_equal(p.z, q.z)
        assert np.array_equal(p.s, q.s) and p.tau == q.tau and p.kappa == q.kappa


# -- 9. benchmark reproducibility -----------------------------------------------

@pytest.mark.slow
def test_bench_runs_are_reproducible():
    subset = default_suite()[:6]
    for mode in ("basic", "comb"):
        first = [run_one(sp, mode) for sp in subset]
        second = [run_one(sp, mode) for sp in subset]
        assert [(r.status, r.iters) for r in first] == \
               [(r.status, r.iters) for r in second]
