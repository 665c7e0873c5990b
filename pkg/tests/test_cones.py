"""Cone oracle checks against finite differences and barrier identities."""

import numpy as np
import pytest

from conipm.cones import random_interior_point
from conipm.errors import OracleMisuse

from _util import cone_zoo, barrier_value, fd_gradient, fd_step

RNG = np.random.default_rng(11)
ZOO = cone_zoo(RNG)


def _points(cone, count, seed=0):
    rng = np.random.default_rng(seed)
    return [random_interior_point(cone, rng) for _ in range(count)]


@pytest.fixture(params=ZOO, ids=[c.tag for c in ZOO])
def cone(request):
    return request.param.clone()


def test_initial_point_is_interior(cone):
    s = cone.initial_point()
    assert cone.is_feasible(s)


def test_gradient_matches_finite_differences(cone):
    for s in _points(cone, 5, seed=1):
        g = cone.gradient(s)
        ref = fd_gradient(cone, s)
        scale = max(1.0, np.max(np.abs(g)))
        assert np.max(np.abs(g - ref)) / scale < 1e-4


def test_hessian_matches_gradient_differences(cone):
    rng = np.random.default_rng(2)
    for s in _points(cone, 5, seed=2):
        d = rng.standard_normal(cone.dim)
        h = fd_step(cone, s, d)
        ref = (cone.clone().gradient(s + h * d) - cone.clone().gradient(s - h * d)) / (2 * h)
        hd = cone.hessian_apply(s, d)
        assert np.max(np.abs(hd - ref)) / max(1.0, np.max(np.abs(hd))) < 1e-4


def test_dense_hessian_agrees_with_apply(cone):
    rng = np.random.default_rng(3)
    for s in _points(cone, 3, seed=3):
        d = rng.standard_normal(cone.dim)
        hd = cone.hessian_apply(s, d)
        assert np.allclose(cone.hessian(s) @ d, hd,
                           atol=1e-10 * max(1.0, np.max(np.abs(hd))), rtol=1e-9)


def test_hessian_solve_roundtrip(cone):
    rng = np.random.default_rng(4)
    for s in _points(cone, 5, seed=4):
        r = rng.standard_normal(cone.dim)
        back = cone.hessian_apply(s, cone.hessian_solve(s, r))
        assert np.max(np.abs(back - r)) / max(1.0, np.max(np.abs(r))) < 1e-6


def test_inv_hess_quad_matches_solve(cone):
    rng = np.random.default_rng(5)
    for s in _points(cone, 5, seed=5):
        r = rng.standard_normal(cone.dim)
        direct = cone.inv_hess_quad(s, r)
        via_solve = float(r @ cone.hessian_solve(s, r))
        assert direct == pytest.approx(via_solve, rel=1e-7)


def test_log_homogeneity_identities(cone):
    """-s'g(s) = nu,  g(s)'H(s)^{-1}g(s) = nu,  g(t s) = g(s)/t."""
    for s in _points(cone, 5, seed=6):
        g = cone.gradient(s)
        nu = cone.nu
        assert abs(-float(s @ g) - nu) < 1e-9 * nu
        assert abs(cone.inv_hess_quad(s, g) - nu) < 1e-7 * nu
        g2 = cone.clone().gradient(2.0 * s)
        assert np.max(np.abs(g2 - g / 2.0)) <= 1e-10 * max(1.0, np.max(np.abs(g)))


def test_third_order_matches_hessian_differences(cone):
    rng = np.random.default_rng(7)
    for s in _points(cone, 5, seed=7):
        d = rng.standard_normal(cone.dim)
        h = fd_step(cone, s, d)
        ref = -0.5 * (cone.clone().hessian_apply(s + h * d, d)
                      - cone.clone().hessian_apply(s - h * d, d)) / (2 * h)
        t = cone.too(s, d)
        assert np.max(np.abs(t - ref)) / max(1.0, np.max(np.abs(t))) < 1e-3


def test_third_order_is_quadratic_in_direction(cone):
    rng = np.random.default_rng(8)
    for s in _points(cone, 3, seed=8):
        d = rng.standard_normal(cone.dim)
        t = cone.too(s, d)
        t3 = cone.too(s, 3.0 * d)
        assert np.max(np.abs(t3 - 9.0 * t)) <= 1e-12 * max(1e-300, np.max(np.abs(9.0 * t)))


def test_infeasible_point_raises(cone):
    s = cone.initial_point()
    bad = -s
    assert not cone.is_feasible(bad)
    with pytest.raises(OracleMisuse):
        cone.gradient(bad)


def test_barrier_value_is_log_homogeneous(cone):
    """Independent sanity check on the reference barrier itself."""
    s = cone.initial_point()
    lhs = barrier_value(cone, 2.0 * s)
    rhs = barrier_value(cone, s) - cone.nu * np.log(2.0)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_clone_does_not_share_cache(cone):
    s1 = cone.initial_point()
    twin = cone.clone()
    g1 = cone.gradient(s1)
    rng = np.random.default_rng(9)
    s2 = random_interior_point(twin, rng)
    twin.gradient(s2)
    # the original must still answer for its own point
    assert np.array_equal(cone.gradient(s1), g1)
