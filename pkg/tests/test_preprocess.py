"""Reduction pipeline: equilibration, equality elimination, lifting,
and the unit starting point."""

import numpy as np
import pytest

from conipm.model import build_model, PRIMAL_INFEASIBLE
from conipm.cones import Nonneg
from conipm.preprocess import (preprocess, InconsistencyReport, initial_iterate,
                               mu_of, barrier_total, lift_primal, lift_dual, lift_slack)

from _util import mixed_model, tiny_lp


@pytest.fixture
def pre():
    out = preprocess(mixed_model(np.random.default_rng(3)))
    assert not isinstance(out, InconsistencyReport)
    return out


def test_reduced_cone_matrix_has_full_column_rank(pre):
    assert np.linalg.matrix_rank(pre.G) == pre.G.shape[1]


def test_barrier_total_counts_tau_pair(pre):
    assert barrier_total(pre) == sum(c.nu for c in pre.cones) + 1.0


def test_initial_iterate_sits_on_the_unit_path(pre):
    it = initial_iterate(pre)
    assert it.tau == 1.0 and it.kappa == 1.0
    assert mu_of(pre, it) == pytest.approx(1.0, abs=1e-12)
    for off, cone in zip(pre.cone_offsets, pre.cones):
        sl = slice(off, off + cone.dim)
        sbar = it.z[sl] if cone.use_dual else it.s[sl]
        assert cone.clone().is_feasible(sbar)


def test_lifted_witness_satisfies_original_equalities():
    rng = np.random.default_rng(5)
    m = mixed_model(rng)
    out = preprocess(m)
    it = initial_iterate(out)
    x = lift_primal(out, it.x, it.tau)
    assert np.max(np.abs(m.A @ x - it.tau * m.b)) < 1e-10 * max(1.0, np.max(np.abs(m.b)))
    # a slack consistent in reduced coordinates stays consistent after lifting
    s_red = out.h * it.tau - out.G @ it.x
    s = lift_slack(out, s_red)
    assert np.max(np.abs(m.G @ x + s - it.tau * m.h)) < 1e-8 * max(1.0, np.max(np.abs(m.h)))
    y, z = lift_dual(out, it.z, it.tau)
    assert len(y) == m.p and len(z) == m.q


def test_inconsistent_equalities_reported():
    # x1 = 0 and x1 = 1 simultaneously
    A = np.array([[1.0, 0.0], [1.0, 0.0]])
    b = np.array([0.0, 1.0])
    m = build_model(np.ones(2), A, b, -np.eye(2), np.zeros(2), [Nonneg(2)])
    out = preprocess(m)
    assert isinstance(out, InconsistencyReport)
    assert out.status == PRIMAL_INFEASIBLE


def test_redundant_equalities_are_dropped():
    A = np.array([[1.0, 1.0], [2.0, 2.0]])
    b = np.array([1.0, 2.0])
    m = build_model(np.ones(2), A, b, -np.eye(2), np.zeros(2), [Nonneg(2)])
    out = preprocess(m)
    assert not isinstance(out, InconsistencyReport)
    assert out.a_rank == 1


def test_badly_scaled_model_is_equilibrated():
    m = tiny_lp()
    m.c *= 1e8
    m.G[0] *= 1e-6
    out = preprocess(m)
    assert not isinstance(out, InconsistencyReport)
    col_mag = np.max(np.abs(out.G), axis=0)
    assert np.all(col_mag < 1e4) and np.all(col_mag > 1e-6)
