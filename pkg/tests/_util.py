"""Shared helpers for the test suite: a zoo of every supported cone,
independent barrier-value formulas, and a few hand-sized models."""

import numpy as np

from conipm.cones import (Nonneg, PsdSvec, LinfEpi, L2Epi, SqrEpi, GenPower,
                          PowerMean, GeoMean, LogPersp, Lmi, WsosDualScalar)
from conipm.model import build_model
from conipm.svec import smat


def _random_sym(rng, d):
    m = rng.standard_normal((d, d))
    return (m + m.T) / 2.0


def lmi_matrices(rng, side=3, count=4):
    """Random symmetric coefficient matrices with a PD leading matrix."""
    mats = [np.eye(side) + 0.2 * _random_sym(rng, side)]
    mats += [_random_sym(rng, side) for _ in range(count - 1)]
    while True:
        try:
            np.linalg.cholesky(mats[0])
            return mats
        except np.linalg.LinAlgError:
            mats[0] += np.eye(side)


def wsos_bases(npts=7, deg=4):
    """Monomial interpolation bases for [-1, 1] at Chebyshev points."""
    pts = np.cos(np.pi * np.arange(npts) / (npts - 1))
    v = np.vander(pts, deg, increasing=True)
    w = np.sqrt(np.maximum(1 - pts**2, 1e-3))[:, None] * np.vander(pts, deg - 1, increasing=True)
    return v, w


def cone_zoo(rng):
    """One instance of every supported cone, small enough for dense checks."""
    v, w = wsos_bases()
    return [
        Nonneg(4),
        PsdSvec(3),
        LinfEpi(4),
        L2Epi(3),
        SqrEpi(3),
        GenPower(np.array([0.3, 0.7]), 3),
        PowerMean(np.array([0.2, 0.5, 0.3])),
        GeoMean(4),
        LogPersp(3),
        Lmi(lmi_matrices(rng)),
        WsosDualScalar([v, w]),
    ]


def barrier_value(cone, s):
    """Log-homogeneous barrier evaluated from first principles.

    Written independently of the package internals so gradient checks
    have a genuinely separate reference.
    """
    tag = cone.tag
    if tag == "NONNEG":
        return -np.sum(np.log(s))
    if tag == "L2":
        return -np.log(s[0] ** 2 - s[1:] @ s[1:])
    if tag == "SQR":
        return -np.log(2 * s[0] * s[1] - s[2:] @ s[2:])
    if tag == "LINF":
        u, w = s[0], s[1:]
        return -np.sum(np.log(u * u - w * w)) + (len(w) - 1) * np.log(u)
    if tag == "GPOWER":
        u, w = s[: cone.r], s[cone.r:]
        return (-np.log(np.exp(2 * cone.alpha @ np.log(u)) - w @ w)
                - np.sum((1 - cone.alpha) * np.log(u)))
    if tag in ("POWER", "GEOM"):
        u, w = s[0], s[1:]
        return -np.log(np.exp(cone.alpha @ np.log(w)) - u) - np.sum(np.log(w))
    if tag == "LOG":
        u, v, w = s[0], s[1], s[2:]
        return -np.log(v * np.sum(np.log(w / v)) - u) - np.sum(np.log(w)) - np.log(v)
    if tag == "PSD":
        return -np.linalg.slogdet(smat(s))[1]
    if tag == "LMI":
        return -np.linalg.slogdet(sum(c * m for c, m in zip(s, cone.mats)))[1]
    if tag == "WSOS":
        return -sum(np.linalg.slogdet(m.T @ (s[:, None] * m))[1] for m in cone.mats)
    raise KeyError(tag)


def fd_gradient(cone, s, h=1e-6):
    g = np.zeros(cone.dim)
    for i in range(cone.dim):
        e = np.zeros(cone.dim)
        e[i] = h
        g[i] = (barrier_value(cone, s + e) - barrier_value(cone, s - e)) / (2 * h)
    return g


def fd_step(cone, s, d, delta=1e-3):
    """Difference step sized in the local norm so s +- h*d stays interior.

    Keeps the relative truncation error of central differences roughly
    delta**2 regardless of how close s sits to the boundary.
    """
    local = np.sqrt(max(float(d @ cone.clone().hessian_apply(s, d)), 1e-300))
    return delta / local


def tiny_lp():
    """min x1 + x2  s.t.  x >= 0,  x1 + x2 >= 1;  optimum 1."""
    c = np.array([1.0, 1.0])
    G = np.vstack([-np.eye(2), [[-1.0, -1.0]]])
    h = np.array([0.0, 0.0, -1.0])
    return build_model(c, np.zeros((0, 2)), np.zeros(0), G, h, [Nonneg(3)])


def infeasible_lp():
    """x >= 0 and x <= -1 cannot both hold."""
    G = np.array([[-1.0], [1.0]])
    h = np.array([0.0, -1.0])
    return build_model(np.array([1.0]), np.zeros((0, 1)), np.zeros(0), G, h, [Nonneg(2)])


def unbounded_lp():
    """min -x  s.t.  x >= 0 decreases without bound."""
    return build_model(np.array([-1.0]), np.zeros((0, 1)), np.zeros(0),
                       np.array([[-1.0]]), np.array([0.0]), [Nonneg(1)])


def mixed_model(rng, dual=False):
    """Random equality-constrained model over four cone families.

    Feasibility is not arranged, which is fine for factorization and
    direction tests; use :func:`feasible_mixed_model` for full solves.
    """
    n, p = 5, 2
    A = rng.standard_normal((p, n))
    b = A @ rng.standard_normal(n)
    cones = [Nonneg(3), L2Epi(2, use_dual=dual), GeoMean(3), PsdSvec(2, use_dual=dual)]
    q = sum(c.dim for c in cones)
    G = rng.standard_normal((q, n))
    h = rng.standard_normal(q)
    c = rng.standard_normal(n)
    return build_model(c, A, b, G, h, cones)


def feasible_mixed_model(rng, dual=False):
    """Mixed-cone model with strictly feasible primal and dual points."""
    from conipm.bench import _feasible_completion

    cones = [Nonneg(3), L2Epi(2, use_dual=dual), GeoMean(3), PsdSvec(2, use_dual=dual)]
    return _feasible_completion(rng, cones, n=5, p=2)
