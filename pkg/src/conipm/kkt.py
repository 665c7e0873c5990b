"""Direction engine: structured solve of the embedded-path linear systems.

Every search direction solves the same left-hand side

    G' dz + c dtau                  = r_x
    -G dx + h dtau - ds             = r_s
    -c' dx - h' dz - dkappa         = r_tau
    dz_k + mu H_k ds_k              = r_k      (per cone, swapped if dual)
    dkappa + (mu / tau^2) dtau      = r_kap

for four right-hand sides.  Eliminating ds, dkappa, and dz reduces the
system to one SPD matrix M = G' W G (W block-diagonal from the cone
Hessians), factored once per iterate and reused for every direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter as _clock

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import NumericalFailure
from .preprocess import Iterate, PreprocessedModel

REFINE_ROUNDS = 3
REFINE_TARGET = 1e-11


@dataclass
class DirectionRhs:
    """Right-hand side for one direction solve."""

    r_x: np.ndarray    # n
    r_s: np.ndarray    # q
    r_tau: float
    r_cone: np.ndarray  # q, per-cone rows in (z-bar, s-bar) order
    r_kap: float
    kind: str = "?"


@dataclass
class Direction:
    dx: np.ndarray
    dz: np.ndarray
    dtau: float
    ds: np.ndarray
    dkappa: float

    def scaled(self, t: float) -> "Direction":
        return Direction(t * self.dx, t * self.dz, t * self.dtau, t * self.ds, t * self.dkappa)

    def plus(self, other: "Direction") -> "Direction":
        return Direction(self.dx + other.dx, self.dz + other.dz, self.dtau + other.dtau,
                         self.ds + other.ds, self.dkappa + other.dkappa)


class KktFactorization:
    """Cone-Hessian-weighted factorization at a fixed iterate.

    Builds W once (mu H_k for primal-oracle cones, its inverse for
    dual-oracle cones), factors M = G'WG, and serves any number of
    right-hand sides.  ``solves`` counts calls for reuse instrumentation.
    """

    def __init__(self, pre: PreprocessedModel, it: Iterate, mu: float):
        self.pre = pre
        self.it = it
        self.mu = mu
        self.solves = 0
        self.solve_seconds = 0.0
        q, n = pre.q, pre.n
        w = np.zeros((q, q))
        self._dual_chols = {}
        for idx, (off, cone) in enumerate(zip(pre.cone_offsets, pre.cones)):
            sl = slice(off, off + cone.dim)
            sbar = it.z[sl] if cone.use_dual else it.s[sl]
            hess = cone.hessian(sbar)
            if cone.use_dual:
                try:
                    ch = cho_factor(mu * hess, lower=True)
                except np.linalg.LinAlgError as exc:
                    raise NumericalFailure(f"dual cone weight factorization failed: {exc}")
                self._dual_chols[idx] = ch
                w[sl, sl] = cho_solve(ch, np.eye(cone.dim))
            else:
                w[sl, sl] = mu * hess
        self.w = w
        self.wh = w @ pre.h
        self.gtw = pre.G.T @ w
        m = self.gtw @ pre.G
        try:
            self._m_chol = cho_factor(m, lower=True) if n else None
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"reduced normal matrix not positive definite: {exc}")
        self.cgwh = pre.c + pre.G.T @ self.wh  # c + G'Wh
        a = pre.G.T @ self.wh
        u = self._m_solve(pre.c - a)
        self._u = u
        self.d0 = float(pre.h @ self.wh) + mu / it.tau**2
        # The pivot equals mu/tau^2 + c'M^{-1}c + h'(W - WG M^{-1} G'W)h.
        # Assembling it as d0 + (c + G'Wh)'u subtracts two large numbers and
        # can round to a negative value late in the solve; the two quadratic
        # forms below are the same quantity written without that
        # cancellation, so positivity survives in floating point.
        if n:
            half = solve_triangular(self._m_chol[0], pre.c, lower=True)
            cmc = float(half @ half)
            resid = pre.h - pre.G @ self._m_solve(a)
            proj = max(float(resid @ (w @ resid)), 0.0)
        else:
            cmc, proj = 0.0, float(pre.h @ self.wh)
        self.denom = mu / it.tau**2 + cmc + proj
        if not np.isfinite(self.denom) or self.denom <= 0.0:
            raise NumericalFailure("tau pivot lost positivity")

    def _m_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._m_chol is None:
            return np.zeros(0)
        return cho_solve(self._m_chol, rhs)

    def _rhat(self, r_cone: np.ndarray) -> np.ndarray:
        """Per-cone transformed rhs so that dz = rhat - W ds uniformly."""
        out = r_cone.copy()
        for idx, ch in self._dual_chols.items():
            off = self.pre.cone_offsets[idx]
            sl = slice(off, off + self.pre.cones[idx].dim)
            out[sl] = cho_solve(ch, r_cone[sl])
        return out

    def _solve_once(self, rhs: DirectionRhs) -> Direction:
        pre, it, mu = self.pre, self.it, self.mu
        rhat = self._rhat(rhs.r_cone)
        w_rs = self.w @ rhs.r_s
        rho = rhs.r_x - pre.G.T @ rhat - pre.G.T @ w_rs
        v = self._m_solve(rho)
        t0 = rhs.r_tau + float(pre.h @ rhat) + float(pre.h @ w_rs) + rhs.r_kap
        dtau = (t0 + float(self.cgwh @ v)) / self.denom
        dx = v - dtau * self._u
        ds = -pre.G @ dx + dtau * pre.h - rhs.r_s
        dz = rhat - self.w @ ds
        dkappa = rhs.r_kap - (mu / it.tau**2) * dtau
        return Direction(dx, dz, dtau, ds, dkappa)

    def residual(self, rhs: DirectionRhs, d: Direction) -> DirectionRhs:
        """Residual rhs - (system applied to d), using the cone oracles."""
        pre, it, mu = self.pre, self.it, self.mu
        r_x = rhs.r_x - (pre.G.T @ d.dz + pre.c * d.dtau)
        r_s = rhs.r_s - (-pre.G @ d.dx + pre.h * d.dtau - d.ds)
        r_tau = rhs.r_tau - (-float(pre.c @ d.dx) - float(pre.h @ d.dz) - d.dkappa)
        r_cone = np.empty(pre.q)
        for off, cone in zip(pre.cone_offsets, pre.cones):
            sl = slice(off, off + cone.dim)
            sbar = it.z[sl] if cone.use_dual else it.s[sl]
            dzb, dsb = (d.ds[sl], d.dz[sl]) if cone.use_dual else (d.dz[sl], d.ds[sl])
            r_cone[sl] = rhs.r_cone[sl] - (dzb + mu * cone.hessian_apply(sbar, dsb))
        r_kap = rhs.r_kap - (d.dkappa + (mu / it.tau**2) * d.dtau)
        return DirectionRhs(r_x, r_s, r_tau, r_cone, r_kap, rhs.kind)

    @staticmethod
    def _resid_norm(r: DirectionRhs) -> float:
        parts = [np.max(np.abs(r.r_x), initial=0.0), np.max(np.abs(r.r_s), initial=0.0),
                 abs(r.r_tau), np.max(np.abs(r.r_cone), initial=0.0), abs(r.r_kap)]
        return float(max(parts))

    def solve(self, rhs: DirectionRhs) -> Direction:
        """Solve with iterative refinement (keeps the best candidate)."""
        t0 = _clock()
        try:
            return self._solve_refined(rhs)
        finally:
            self.solve_seconds += _clock() - t0

    def _solve_refined(self, rhs: DirectionRhs) -> Direction:
        self.solves += 1
        scale = max(1.0, self._resid_norm(rhs))
        best = self._solve_once(rhs)
        best_res = self._resid_norm(self.residual(rhs, best))
        for _ in range(REFINE_ROUNDS):
            if best_res <= REFINE_TARGET * scale:
                break
            corr = self._solve_once(self.residual(rhs, best))
            cand = best.plus(corr)
            cand_res = self._resid_norm(self.residual(rhs, cand))
            if cand_res >= best_res:
                break
            best, best_res = cand, cand_res
        if not np.isfinite(best_res):
            raise NumericalFailure("direction solve produced non-finite values")
        return best


# ---------------------------------------------------------------------------
# Dense reference solve (testing oracle for small systems)


def dense_system_matrix(pre: PreprocessedModel, it: Iterate, mu: float) -> np.ndarray:
    """Full dense left-hand side in (x, z, tau, s, kappa) order."""
    n, q = pre.n, pre.q
    dim = n + q + 1 + q + 1
    ix, iz, itau, is_, ikap = 0, n, n + q, n + q + 1, n + 2 * q + 1
    m = np.zeros((dim, dim))
    m[ix:iz, iz:itau] = pre.G.T
    m[ix:iz, itau] = pre.c
    m[iz:itau, ix:iz] = -pre.G
    m[iz:itau, itau] = pre.h
    m[iz:itau, is_:ikap] = -np.eye(q)
    m[itau, ix:iz] = -pre.c
    m[itau, iz:itau] = -pre.h
    m[itau, ikap] = -1.0
    row = itau + 1
    for off, cone in zip(pre.cone_offsets, pre.cones):
        sl_z = slice(iz + off, iz + off + cone.dim)
        sl_s = slice(is_ + off, is_ + off + cone.dim)
        rows = slice(row, row + cone.dim)
        sbar = it.z[slice(off, off + cone.dim)] if cone.use_dual else it.s[slice(off, off + cone.dim)]
        hess = mu * cone.hessian(sbar)
        if cone.use_dual:
            m[rows, sl_s] = np.eye(cone.dim)
            m[rows, sl_z] = hess
        else:
            m[rows, sl_z] = np.eye(cone.dim)
            m[rows, sl_s] = hess
        row += cone.dim
    m[row, ikap] = 1.0
    m[row, itau] = mu / it.tau**2
    return m


def dense_solve(pre: PreprocessedModel, it: Iterate, mu: float, rhs: DirectionRhs) -> Direction:
    n, q = pre.n, pre.q
    full = np.concatenate([rhs.r_x, rhs.r_s, [rhs.r_tau], rhs.r_cone, [rhs.r_kap]])
    sol = np.linalg.solve(dense_system_matrix(pre, it, mu), full)
    return Direction(sol[:n], sol[n : n + q], float(sol[n + q]),
                     sol[n + q + 1 : n + 2 * q + 1], float(sol[n + 2 * q + 1]))
