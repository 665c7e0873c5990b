"""Cone kit: proper-cone descriptions with barrier derivative oracles.

Each cone carries a logarithmically homogeneous self-concordant barrier f
and exposes, at a strictly feasible point s:

* ``gradient(s)``          -- g(s) = grad f(s)
* ``hessian_apply(s, d)``  -- H(s) d, with H = hess f(s)
* ``hessian(s)``           -- dense H(s)
* ``hessian_solve(s, r)``  -- H(s)^{-1} r
* ``too(s, d)``            -- T(s, d) = -1/2 * (third derivative of f)[d, d]

Calling a derivative oracle at an infeasible point raises
:class:`~conipm.errors.OracleMisuse`.  Each instance caches work for the
most recent point; instances are cheap to ``clone`` so concurrent solves
never share mutable state.
"""

from __future__ import annotations

import copy

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.linalg import qr as scipy_qr

from .errors import DimensionError, NumericalFailure, OracleMisuse
from .svec import smat, svec, svec_dim, svec_weights

FEAS_MARGIN = 1e-14


class Cone:
    """Base class holding the point cache and shared plumbing."""

    tag = "?"
    dim: int
    nu: float

    def __init__(self, use_dual: bool = False):
        self.use_dual = bool(use_dual)
        self._pt: np.ndarray | None = None
        self._feas = False
        self._c: dict = {}

    # -- point management -------------------------------------------------

    def _coerce(self, s) -> np.ndarray:
        s = np.ascontiguousarray(s, dtype=float)
        if s.shape != (self.dim,):
            raise DimensionError(
                f"{self.tag}: expected point of length {self.dim}, got shape {s.shape}"
            )
        return s

    def is_feasible(self, s) -> bool:
        """Strict interior test.  Caches derived factors for the point."""
        s = self._coerce(s)
        if self._pt is not None and np.array_equal(s, self._pt):
            return self._feas
        self._pt = s.copy()
        self._c = {}
        self._feas = bool(np.all(np.isfinite(s))) and self._check(s)
        return self._feas

    def _require(self, s) -> np.ndarray:
        if not self.is_feasible(s):
            raise OracleMisuse(f"{self.tag}: oracle evaluated at an infeasible point")
        return self._pt

    def clone(self) -> "Cone":
        """Fresh instance with the same description and an empty cache."""
        other = copy.deepcopy(self)
        other._pt, other._feas, other._c = None, False, {}
        return other

    # -- oracles (subclass API) -------------------------------------------

    def _check(self, s: np.ndarray) -> bool:
        raise NotImplementedError

    def gradient(self, s) -> np.ndarray:
        s = self._require(s)
        if "grad" not in self._c:
            self._c["grad"] = self._grad(s)
        return self._c["grad"]

    def hessian_apply(self, s, d) -> np.ndarray:
        s = self._require(s)
        d = np.ascontiguousarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise DimensionError(f"{self.tag}: direction has shape {d.shape}")
        return self._happly(s, d)

    def hessian(self, s) -> np.ndarray:
        s = self._require(s)
        if "hess" not in self._c:
            self._c["hess"] = self._hess(s)
        return self._c["hess"]

    def hessian_solve(self, s, r) -> np.ndarray:
        s = self._require(s)
        r = np.ascontiguousarray(r, dtype=float)
        if r.shape != (self.dim,):
            raise DimensionError(f"{self.tag}: rhs has shape {r.shape}")
        return self._hsolve(s, r)

    def inv_hess_quad(self, s, r) -> float:
        """r' H(s)^{-1} r, computed through a Cholesky half-solve.

        A half-solve loses only sqrt(cond(H)) * eps relative accuracy, so
        proximity measures stay reliable close to the cone boundary where a
        full inverse-Hessian solve would not.
        """
        s = self._require(s)
        r = np.ascontiguousarray(r, dtype=float)
        if r.shape != (self.dim,):
            raise DimensionError(f"{self.tag}: rhs has shape {r.shape}")
        return self._ihq(s, r)

    def _ihq(self, s, r) -> float:
        if "ihq" not in self._c:
            hess = self.hessian(s)
            # Jacobi scaling keeps the factorization's backward error from
            # washing out small eigenvalues when the Hessian norm is large.
            dscale = np.sqrt(np.diag(hess))
            try:
                low = np.linalg.cholesky(hess / np.outer(dscale, dscale))
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"{self.tag}: barrier Hessian factorization failed") from exc
            self._c["ihq"] = (low, dscale)
        low, dscale = self._c["ihq"]
        half = solve_triangular(low, r / dscale, lower=True)
        return float(half @ half)

    def too(self, s, d) -> np.ndarray:
        s = self._require(s)
        d = np.ascontiguousarray(d, dtype=float)
        if d.shape != (self.dim,):
            raise DimensionError(f"{self.tag}: direction has shape {d.shape}")
        return self._too(s, d)

    def initial_point(self) -> np.ndarray:
        raise NotImplementedError

    # -- defaults ----------------------------------------------------------

    def _grad(self, s):
        raise NotImplementedError

    def _happly(self, s, d):
        return self.hessian(s) @ d

    def _hess(self, s):
        raise NotImplementedError

    def _hsolve(self, s, r):
        # Dense Cholesky with one refinement pass.
        if "hchol" not in self._c:
            try:
                self._c["hchol"] = cho_factor(self.hessian(s), lower=True)
            except np.linalg.LinAlgError as exc:
                raise NumericalFailure(f"{self.tag}: barrier Hessian factorization failed") from exc
        ch = self._c["hchol"]
        x = cho_solve(ch, r)
        x += cho_solve(ch, r - self._happly(s, x))
        return x

    def _too(self, s, d):
        raise NotImplementedError

    def __repr__(self):
        flag = ", dual" if self.use_dual else ""
        return f"{type(self).__name__}(dim={self.dim}{flag})"


# ---------------------------------------------------------------------------
# Nonnegative orthant


class Nonneg(Cone):
    """Nonnegative orthant, barrier -sum log s_i, nu = d."""

    tag = "NONNEG"

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("NONNEG needs d >= 1")
        self.dim = d
        self.nu = float(d)

    def _check(self, s):
        scale = max(1.0, float(np.max(np.abs(s))))
        return bool(np.all(s > FEAS_MARGIN * scale))

    def _grad(self, s):
        return -1.0 / s

    def _happly(self, s, d):
        return d / s**2

    def _hess(self, s):
        return np.diag(1.0 / s**2)

    def _hsolve(self, s, r):
        return r * s**2

    def _too(self, s, d):
        return d**2 / s**3

    def _ihq(self, s, r):
        return float(np.sum((r * s) ** 2))

    def initial_point(self):
        return np.ones(self.dim)


# ---------------------------------------------------------------------------
# Quadratic-form epigraph cones (Euclidean norm and squared-norm families)


class _QuadFormCone(Cone):
    """Cones {s : s'Js >= 0, head(s) > 0} with barrier -log(s'Js), nu = 2.

    J is an involution (J @ J = I), which gives the closed-form inverse
    Hessian H^{-1} = s s' - (s'Js / 2) J.
    """

    n_head = 1  # how many leading coordinates must be positive

    def _jmul(self, v):
        raise NotImplementedError

    def _phi(self, s):
        return float(s @ self._jmul(s))

    def _check(self, s):
        if np.any(s[: self.n_head] <= 0.0):
            return False
        scale = max(1.0, float(s @ s))
        return self._phi(s) > FEAS_MARGIN * scale

    def _grad(self, s):
        return (-2.0 / self._phi(s)) * self._jmul(s)

    def _happly(self, s, d):
        jbar = 1.0 / self._phi(s)
        js = self._jmul(s)
        return 2.0 * jbar * (2.0 * jbar * js * (js @ d) - self._jmul(d))

    def _hess(self, s):
        jbar = 1.0 / self._phi(s)
        js = self._jmul(s)
        h = (4.0 * jbar * jbar) * np.outer(js, js)
        h -= 2.0 * jbar * self._jmat()
        return h

    def _jmat(self):
        raise NotImplementedError

    def _hsolve(self, s, r):
        return s * (s @ r) - 0.5 * self._phi(s) * self._jmul(r)

    def _ihq(self, s, r):
        return float((s @ r) ** 2 - 0.5 * self._phi(s) * (r @ self._jmul(r)))

    def _too(self, s, d):
        jbar = 1.0 / self._phi(s)
        js = self._jmul(s)
        jd = self._jmul(d)
        hd = 2.0 * jbar * (2.0 * jbar * js * (js @ d) - jd)
        return jbar * (js * (d @ hd) + hd * (s @ jd) - (s @ hd) * jd)


class L2Epi(_QuadFormCone):
    """Epigraph of the Euclidean norm, dim 1 + d, nu = 2."""

    tag = "L2"
    n_head = 1

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("L2 needs d >= 1")
        self.dim = 1 + d
        self.nu = 2.0

    def _jmul(self, v):
        out = -v.astype(float, copy=True)
        out[0] = v[0]
        return out

    def _jmat(self):
        j = -np.eye(self.dim)
        j[0, 0] = 1.0
        return j

    def initial_point(self):
        t = np.zeros(self.dim)
        t[0] = np.sqrt(2.0)
        return t


class SqrEpi(_QuadFormCone):
    """Epigraph of the squared norm: 2 u v >= ||w||^2, u,v > 0; nu = 2."""

    tag = "SQR"
    n_head = 2

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("SQR needs d >= 1")
        self.dim = 2 + d
        self.nu = 2.0

    def _jmul(self, v):
        out = -v.astype(float, copy=True)
        out[0], out[1] = v[1], v[0]
        return out

    def _jmat(self):
        j = -np.eye(self.dim)
        j[0, 0] = j[1, 1] = 0.0
        j[0, 1] = j[1, 0] = 1.0
        return j

    def initial_point(self):
        t = np.zeros(self.dim)
        t[0] = t[1] = 1.0
        return t


# ---------------------------------------------------------------------------
# Epigraph of the max norm


class LinfEpi(Cone):
    """Epigraph of the max norm: u >= |w_i|; barrier nu = 1 + d.

    f(u, w) = -sum_i log(u^2 - w_i^2) + (d - 1) log u.
    """

    tag = "LINF"

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("LINF needs d >= 1")
        self.d = d
        self.dim = 1 + d
        self.nu = float(1 + d)

    def _check(self, s):
        u, w = s[0], s[1:]
        if u <= 0.0:
            return False
        scale = max(1.0, u * u)
        return bool(np.all(u * u - w * w > FEAS_MARGIN * scale))

    def _grad(self, s):
        u, w = s[0], s[1:]
        t = 1.0 / (u * u - w * w)
        g = np.empty(self.dim)
        g[0] = -2.0 * u * np.sum(t) + (self.d - 1) / u
        g[1:] = 2.0 * w * t
        return g

    def _hess(self, s):
        u, w = s[0], s[1:]
        t = 1.0 / (u * u - w * w)
        # 4u^2 t^2 - 2t = 2 t^2 (u^2 + w^2) exactly; same for the diagonal.
        h = np.zeros((self.dim, self.dim))
        h[0, 0] = np.sum(2.0 * t * t * (u * u + w * w)) - (self.d - 1) / (u * u)
        h[0, 1:] = h[1:, 0] = -4.0 * u * w * t * t
        h[np.arange(1, self.dim), np.arange(1, self.dim)] = 2.0 * t * t * (u * u + w * w)
        return h

    def _hsolve(self, s, r):
        # Arrowhead structure: diagonal w-w block, dense u row/column.  The
        # Schur complement simplifies to sum(2/(u^2+w^2)) - (d-1)/u^2 with
        # no large-term cancellation, so the solve stays accurate near the
        # boundary where the dense factorization would not.
        u, w = s[0], s[1:]
        t = 1.0 / (u * u - w * w)
        upw = u * u + w * w
        schur = float(np.sum(2.0 / upw)) - (self.d - 1) / (u * u)
        coupling = 2.0 * u * w / upw
        x_u = (r[0] + float(coupling @ r[1:])) / schur
        x = np.empty(self.dim)
        x[0] = x_u
        x[1:] = r[1:] / (2.0 * t * t * upw) + coupling * x_u
        return x

    def _ihq(self, s, r):
        return float(r @ self._hsolve(s, r))

    def _too(self, s, d):
        u, w = s[0], s[1:]
        du, dw = d[0], d[1:]
        phi = u * u - w * w
        # Per-term machinery for -log(phi_i) with quadratic phi_i.
        a = 2.0 * u * du - 2.0 * w * dw
        q = 2.0 * du * du - 2.0 * dw * dw
        coeff = q / phi**2 - 2.0 * a * a / phi**3
        third = np.empty(self.dim)
        third[0] = np.sum(coeff * 2.0 * u + (2.0 * a / phi**2) * 2.0 * du)
        third[1:] = coeff * (-2.0 * w) + (2.0 * a / phi**2) * (-2.0 * dw)
        # +(d-1) log u contributes (d-1) * 2 du^2 / u^3 in the u slot.
        third[0] += (self.d - 1) * 2.0 * du * du / u**3
        return -0.5 * third

    def initial_point(self):
        t = np.zeros(self.dim)
        t[0] = np.sqrt(self.d + 1.0)
        return t


# ---------------------------------------------------------------------------
# Power-type cones sharing the -log(phi) machinery


class GenPower(Cone):
    """Generalized power cone: prod u_i^{a_i} >= ||w||, u > 0; nu = 1 + r.

    Barrier -log(prod u_i^{2 a_i} - ||w||^2) - sum (1 - a_i) log u_i.
    """

    tag = "GPOWER"

    def __init__(self, alpha, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        alpha = np.ascontiguousarray(alpha, dtype=float)
        if alpha.ndim != 1 or len(alpha) < 1 or d < 1:
            raise DimensionError("GPOWER needs alpha vector and d >= 1")
        if np.any(alpha <= 0) or abs(np.sum(alpha) - 1.0) > 1e-12:
            raise ValueError("GPOWER exponents must be positive and sum to 1")
        self.alpha = alpha
        self.r = len(alpha)
        self.d = d
        self.dim = self.r + d
        self.nu = float(1 + self.r)

    def _split(self, s):
        return s[: self.r], s[self.r :]

    def _psi(self, u):
        return float(np.exp(2.0 * self.alpha @ np.log(u)))

    def _check(self, s):
        u, w = self._split(s)
        if np.any(u <= 0.0):
            return False
        psi = self._psi(u)
        return psi - float(w @ w) > FEAS_MARGIN * max(1.0, psi)

    def _grad(self, s):
        u, w = self._split(s)
        psi = self._psi(u)
        phi = psi - w @ w
        g = np.empty(self.dim)
        g[: self.r] = -(psi * 2.0 * self.alpha / u) / phi - (1.0 - self.alpha) / u
        g[self.r :] = 2.0 * w / phi
        return g

    def _parts(self, s):
        u, w = self._split(s)
        psi = self._psi(u)
        p = 2.0 * self.alpha / u
        phi = psi - float(w @ w)
        gphi = np.concatenate([psi * p, -2.0 * w])
        return u, w, psi, p, phi, gphi

    def _phi_hess_apply_raw(self, u, w, psi, p, d):
        du, dw = d[: self.r], d[self.r :]
        dd = 2.0 * self.alpha / u**2
        hu = psi * (p * (p @ du) - dd * du)
        return np.concatenate([hu, -2.0 * dw])

    # The Hessian is assembled in the cancellation-free form obtained from
    # psi^2/phi^2 - psi/phi = psi ||w||^2 / phi^2: every term then has a
    # definite sign, which keeps small eigenvalues accurate near the
    # boundary (phi -> 0) where the naive rank-one assembly loses them.

    def _happly(self, s, d):
        u, w, psi, p, phi, gphi = self._parts(s)
        du, dw = d[: self.r], d[self.r :]
        ww = float(w @ w)
        out = np.empty(self.dim)
        out[: self.r] = (ww / phi**2) * psi * p * (p @ du) \
            + (psi / phi) * (2.0 * self.alpha / u**2) * du \
            + (1.0 - self.alpha) / u**2 * du \
            - (2.0 * psi / phi**2) * p * (w @ dw)
        out[self.r :] = -(2.0 * psi / phi**2) * w * (p @ du) \
            + (4.0 / phi**2) * w * (w @ dw) + (2.0 / phi) * dw
        return out

    # Inverse application by block elimination.  The w block is
    # (2/phi) I + (4/phi^2) w w', inverted by Sherman-Morrison; the Schur
    # complement in u collapses to diag - rank-one with the rank-one weight
    # ||w||^2 psi / (phi (phi + 2||w||^2)) after the exact cancellation
    # 2||w||^2 - 2 psi = -2 phi.  The Sherman-Morrison denominator likewise
    # reduces to an explicitly positive multiple of phi, so nothing here
    # loses accuracy as phi -> 0 the way a dense factorization does.
    def _hsolve(self, s, r):
        u, w, psi, p, phi, _ = self._parts(s)
        a = self.alpha
        ww = float(w @ w)
        ru, rw = r[: self.r], r[self.r :]
        edge = phi + 2.0 * ww
        wrw = float(w @ rw)
        t_w = 0.5 * phi * rw - (phi * wrw / edge) * w
        r_u = ru + (psi * wrw / edge) * p
        dinv = phi * u * u / (2.0 * a * psi + (1.0 - a) * phi)
        bfac = 1.0 + ww * float(
            np.sum(2.0 * a * (1.0 - a) / (2.0 * a * psi + (1.0 - a) * phi))
        )
        di_r = dinv * r_u
        di_p = dinv * p
        x_u = di_r + (ww * psi / (phi * phi * bfac)) * float(p @ di_r) * di_p
        x_w = t_w + (psi * float(p @ x_u) / edge) * w
        return np.concatenate([x_u, x_w])

    def _ihq(self, s, r):
        return float(r @ self._hsolve(s, r))

    def _hess(self, s):
        u, w, psi, p, phi, gphi = self._parts(s)
        ww = float(w @ w)
        h = np.zeros((self.dim, self.dim))
        h[: self.r, : self.r] = (ww * psi / phi**2) * np.outer(p, p)
        h[np.arange(self.r), np.arange(self.r)] += \
            (psi / phi) * 2.0 * self.alpha / u**2 + (1.0 - self.alpha) / u**2
        h[: self.r, self.r :] = -(2.0 * psi / phi**2) * np.outer(p, w)
        h[self.r :, : self.r] = h[: self.r, self.r :].T
        h[self.r :, self.r :] = (4.0 / phi**2) * np.outer(w, w)
        h[np.arange(self.r, self.dim), np.arange(self.r, self.dim)] += 2.0 / phi
        return h

    def _too(self, s, d):
        u, w, psi, p, phi, gphi = self._parts(s)
        du = d[: self.r]
        a = gphi @ d
        hd = self._phi_hess_apply_raw(u, w, psi, p, d)
        q = d @ hd
        # third derivative of psi = exp(l), l = 2 sum a_i log u_i
        al = p @ du
        dd = 2.0 * self.alpha / u**2
        ldd = -dd * du  # (hess l) du
        t3u = psi * ((al * al + du @ ldd) * p + 2.0 * al * ldd + 4.0 * self.alpha * du**2 / u**3)
        t3 = np.concatenate([t3u, np.zeros(self.d)])
        third = (q / phi**2 - 2.0 * a * a / phi**3) * gphi + (2.0 * a / phi**2) * hd - t3 / phi
        third[: self.r] += -2.0 * (1.0 - self.alpha) * du**2 / u**3
        return -0.5 * third

    def initial_point(self):
        t = np.zeros(self.dim)
        t[: self.r] = np.sqrt(1.0 + self.alpha)
        return t


class PowerMean(Cone):
    """Hypograph of the weighted power mean: u <= prod w_i^{a_i}; nu = 1 + d.

    Barrier -log(prod w^a - u) - sum log w_i.
    """

    tag = "POWER"

    def __init__(self, alpha, use_dual: bool = False):
        super().__init__(use_dual)
        alpha = np.ascontiguousarray(alpha, dtype=float)
        if alpha.ndim != 1 or len(alpha) < 1:
            raise DimensionError("POWER needs an exponent vector")
        if np.any(alpha <= 0) or abs(np.sum(alpha) - 1.0) > 1e-12:
            raise ValueError("POWER exponents must be positive and sum to 1")
        self.alpha = alpha
        self.d = len(alpha)
        self.dim = 1 + self.d
        self.nu = float(1 + self.d)

    def _parts(self, s):
        u, w = s[0], s[1:]
        psi = float(np.exp(self.alpha @ np.log(w)))
        p = self.alpha / w
        phi = psi - u
        return u, w, psi, p, phi

    def _check(self, s):
        u, w = s[0], s[1:]
        if np.any(w <= 0.0):
            return False
        psi = float(np.exp(self.alpha @ np.log(w)))
        return psi - u > FEAS_MARGIN * max(1.0, abs(u), psi)

    def _grad(self, s):
        u, w, psi, p, phi = self._parts(s)
        g = np.empty(self.dim)
        g[0] = 1.0 / phi
        g[1:] = -psi * p / phi - 1.0 / w
        return g

    def _gphi(self, psi, p):
        return np.concatenate([[-1.0], psi * p])

    def _phi_happly(self, w, psi, p, d):
        dw = d[1:]
        dd = self.alpha / w**2
        out = np.zeros(self.dim)
        out[1:] = psi * (p * (p @ dw) - dd * dw)
        return out

    # Assembled via psi^2/phi^2 - psi/phi = u psi/phi^2 (exact), which
    # avoids the cancellation of the naive rank-one form when phi -> 0
    # (only possible with u > 0, so every term below is then positive).

    def _happly(self, s, d):
        u, w, psi, p, phi = self._parts(s)
        du, dw = d[0], d[1:]
        out = np.empty(self.dim)
        out[0] = (du - psi * (p @ dw)) / phi**2
        out[1:] = -(du * psi / phi**2) * p + (u * psi / phi**2) * p * (p @ dw) \
            + (psi / phi) * (self.alpha / w**2) * dw + dw / w**2
        return out

    def _hess(self, s):
        u, w, psi, p, phi = self._parts(s)
        h = np.empty((self.dim, self.dim))
        h[0, 0] = 1.0 / phi**2
        h[0, 1:] = h[1:, 0] = -(psi / phi**2) * p
        h[1:, 1:] = (u * psi / phi**2) * np.outer(p, p)
        h[np.arange(1, self.dim), np.arange(1, self.dim)] += \
            (psi / phi) * self.alpha / w**2 + 1.0 / w**2
        return h

    # Inverse application: eliminating the scalar u row leaves
    # diag - (psi/phi) p p' in w, whose Sherman-Morrison denominator
    # simplifies exactly to phi * sum(a_i / (a_i psi + phi)) -- positive
    # with no cancellation, so the solve keeps full accuracy as phi -> 0.
    def _hsolve(self, s, r):
        u, w, psi, p, phi = self._parts(s)
        a = self.alpha
        denom = a * psi + phi
        dinv = phi * w * w / denom
        r_w = r[1:] + (psi * r[0]) * p
        di_r = dinv * r_w
        di_p = dinv * p
        gscale = float(np.sum(a / denom))
        x_w = di_r + (psi / (phi * phi * gscale)) * float(p @ di_r) * di_p
        x_u = phi * phi * r[0] + psi * float(p @ x_w)
        return np.concatenate([[x_u], x_w])

    def _ihq(self, s, r):
        return float(r @ self._hsolve(s, r))

    def _too(self, s, d):
        u, w, psi, p, phi = self._parts(s)
        dw = d[1:]
        gphi = self._gphi(psi, p)
        a = gphi @ d
        hd = self._phi_happly(w, psi, p, d)
        q = d @ hd
        al = p @ dw
        dd = self.alpha / w**2
        ldd = -dd * dw
        t3 = np.zeros(self.dim)
        t3[1:] = psi * ((al * al + dw @ ldd) * p + 2.0 * al * ldd + 2.0 * self.alpha * dw**2 / w**3)
        third = (q / phi**2 - 2.0 * a * a / phi**3) * gphi + (2.0 * a / phi**2) * hd - t3 / phi
        third[1:] += -2.0 * dw**2 / w**3
        return -0.5 * third

    def initial_point(self):
        # Interior but not central: prod w^a = 2 for any valid alpha.
        t = np.full(self.dim, 2.0)
        t[0] = 1.0
        return t


class GeoMean(PowerMean):
    """Hypograph of the geometric mean (equal exponents)."""

    tag = "GEOM"

    def __init__(self, d: int, use_dual: bool = False):
        if d < 1:
            raise DimensionError("GEOM needs d >= 1")
        super().__init__(np.full(d, 1.0 / d), use_dual)


class LogPersp(Cone):
    """Hypograph of the perspective of the sum of logs; nu = 2 + d.

    {(u, v, w) : v > 0, w > 0, u <= sum_i v log(w_i / v)}, barrier
    -log(sum_i v log(w_i/v) - u) - sum log w_i - log v.
    """

    tag = "LOG"

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("LOG needs d >= 1")
        self.d = d
        self.dim = 2 + d
        self.nu = float(2 + d)

    def _parts(self, s):
        u, v, w = s[0], s[1], s[2:]
        lw = np.log(w / v)
        phi = v * float(np.sum(lw)) - u
        return u, v, w, lw, phi

    def _check(self, s):
        u, v, w = s[0], s[1], s[2:]
        if v <= 0.0 or np.any(w <= 0.0):
            return False
        lw = np.log(w / v)
        sv = v * float(np.sum(lw))
        return sv - u > FEAS_MARGIN * max(1.0, abs(u), abs(sv))

    def _gphi(self, v, w, lw):
        return np.concatenate([[-1.0, float(np.sum(lw)) - self.d], v / w])

    def _phi_happly(self, v, w, d):
        dv, dw = d[1], d[2:]
        out = np.zeros(self.dim)
        out[1] = -(self.d / v) * dv + float(np.sum(dw / w))
        out[2:] = dv / w - v * dw / w**2
        return out

    def _grad(self, s):
        u, v, w, lw, phi = self._parts(s)
        g = -self._gphi(v, w, lw) / phi
        g[1] -= 1.0 / v
        g[2:] -= 1.0 / w
        return g

    def _happly(self, s, d):
        u, v, w, lw, phi = self._parts(s)
        gphi = self._gphi(v, w, lw)
        out = (gphi @ d) / phi**2 * gphi - self._phi_happly(v, w, d) / phi
        out[1] += d[1] / v**2
        out[2:] += d[2:] / w**2
        return out

    def _hess(self, s):
        u, v, w, lw, phi = self._parts(s)
        gphi = self._gphi(v, w, lw)
        hphi = np.zeros((self.dim, self.dim))
        hphi[1, 1] = -self.d / v
        hphi[1, 2:] = hphi[2:, 1] = 1.0 / w
        hphi[np.arange(2, self.dim), np.arange(2, self.dim)] = -v / w**2
        h = np.outer(gphi, gphi) / phi**2 - hphi / phi
        h[1, 1] += 1.0 / v**2
        h[np.arange(2, self.dim), np.arange(2, self.dim)] += 1.0 / w**2
        return h

    def _too(self, s, d):
        u, v, w, lw, phi = self._parts(s)
        dv, dw = d[1], d[2:]
        gphi = self._gphi(v, w, lw)
        a = gphi @ d
        hd = self._phi_happly(v, w, d)
        q = d @ hd
        t3 = np.zeros(self.dim)
        t3[1] = (self.d / v**2) * dv * dv - float(np.sum(dw**2 / w**2))
        t3[2:] = -2.0 * dw * dv / w**2 + 2.0 * v * dw**2 / w**3
        third = (q / phi**2 - 2.0 * a * a / phi**3) * gphi + (2.0 * a / phi**2) * hd - t3 / phi
        third[1] += -2.0 * dv * dv / v**3
        third[2:] += -2.0 * dw**2 / w**3
        return -0.5 * third

    # Inverse application: u rides only on the rank-one term, so eliminating
    # it leaves the arrowhead -hphi/phi + diag(1/v^2, 1/w^2) in (v, w).  Its
    # Schur complement collapses exactly to d/(v(v+phi)) + 1/v^2 -- positive
    # with no cancellation -- which keeps the solve accurate near the
    # boundary where a dense factorization loses the small eigenvalues.
    def _hsolve(self, s, r):
        u, v, w, lw, phi = self._parts(s)
        gphi = self._gphi(v, w, lw)
        t_v = r[1] + r[0] * gphi[1]
        t_w = r[2:] + r[0] * gphi[2:]
        vp = v + phi
        schur = self.d / (v * vp) + 1.0 / v**2
        x_v = (t_v + float(np.sum(w * t_w)) / vp) / schur
        x_w = (phi * w * w * t_w + w * x_v) / vp
        x_u = phi * phi * r[0] + gphi[1] * x_v + float(np.sum(gphi[2:] * x_w))
        return np.concatenate([[x_u, x_v], x_w])

    def _ihq(self, s, r):
        return float(r @ self._hsolve(s, r))

    def initial_point(self):
        # Interior but not central: phi = 1 at (u, v, w) = (-1, 1, e).
        t = np.full(self.dim, np.e)
        t[0], t[1] = -1.0, 1.0
        return t


# ---------------------------------------------------------------------------
# Cones defined through a linear map into positive semidefinite matrices


class _SliceCone(Cone):
    """Preimages of PSD cones under a linear matrix-valued map Lambda.

    Feasibility factors each block Lambda_l(s) = L_l L_l'; the derivative
    oracles only ever use Lambda, its adjoint, and these Cholesky factors:

      g  = -Lambda*( Lambda^{-1} )
      Hd =  Lambda*( Lambda^{-1} Lambda(d) Lambda^{-1} )
      T  =  Lambda*( Lambda^{-1} Lambda(d) Lambda^{-1} Lambda(d) Lambda^{-1} )
    """

    def _lam(self, vec) -> list[np.ndarray]:
        raise NotImplementedError

    def _lam_adj(self, mats: list[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def slice_frame(self):
        """The (Lambda, Lambda*) closure pair defining this cone."""
        return self._lam, self._lam_adj

    def _check(self, s):
        chols = []
        for blk in self._lam(s):
            scale = max(1.0, float(np.max(np.diag(blk))) if blk.size else 1.0)
            try:
                low = np.linalg.cholesky(blk)
            except np.linalg.LinAlgError:
                return False
            if float(np.min(np.diag(low))) ** 2 <= FEAS_MARGIN * scale:
                return False
            chols.append(low)
        self._c["chols"] = chols
        return True

    def _invs(self, s):
        if "invs" not in self._c:
            invs = []
            for low in self._c["chols"]:
                inv_l = solve_triangular(low, np.eye(low.shape[0]), lower=True)
                invs.append(inv_l.T @ inv_l)
            self._c["invs"] = invs
        return self._c["invs"]

    def _grad(self, s):
        return -self._lam_adj(self._invs(s))

    def _happly(self, s, d):
        invs = self._invs(s)
        return self._lam_adj([inv @ blk @ inv for inv, blk in zip(invs, self._lam(d))])

    def _too(self, s, d):
        invs = self._invs(s)
        outs = []
        for low, inv, blk in zip(self._c["chols"], invs, self._lam(d)):
            y = solve_triangular(low, blk @ inv, lower=True)
            outs.append(y.T @ y)
        return self._lam_adj(outs)

    def _hess(self, s):
        # Generic dense assembly by applying H to basis vectors.
        cols = [self._happly(s, col) for col in np.eye(self.dim)]
        return np.column_stack(cols)


class PsdSvec(_SliceCone):
    """Vectorized PSD cone of d x d matrices; dim d(d+1)/2, nu = d."""

    tag = "PSD"

    def __init__(self, d: int, use_dual: bool = False):
        super().__init__(use_dual)
        if d < 1:
            raise DimensionError("PSD needs d >= 1")
        self.side = d
        self.dim = svec_dim(d)
        self.nu = float(d)

    def _lam(self, vec):
        return [smat(vec)]

    def _lam_adj(self, mats):
        return svec(mats[0])

    def _hess(self, s):
        sinv = self._invs(s)[0]
        rows, cols = np.tril_indices(self.side)
        wts = svec_weights(self.side)
        h = 0.5 * (
            sinv[np.ix_(rows, rows)] * sinv[np.ix_(cols, cols)]
            + sinv[np.ix_(rows, cols)] * sinv[np.ix_(cols, rows)]
        )
        return wts[:, None] * wts[None, :] * h

    def _hsolve(self, s, r):
        mat_s = smat(s)
        return svec(mat_s @ smat(r) @ mat_s)

    def _ihq(self, s, r):
        low = self._c["chols"][0]
        half = low.T @ smat(r) @ low
        return float(np.sum(half * half))

    def initial_point(self):
        return svec(np.eye(self.side))


class Lmi(_SliceCone):
    """Cone {w : sum_i w_i P_i is PSD} for symmetric P_i with P_1 PD; nu = side."""

    tag = "LMI"

    def __init__(self, mats, use_dual: bool = False):
        super().__init__(use_dual)
        mats = [np.ascontiguousarray(m, dtype=float) for m in mats]
        if not mats:
            raise DimensionError("LMI needs at least one matrix")
        side = mats[0].shape[0]
        for m in mats:
            if m.shape != (side, side) or not np.allclose(m, m.T, atol=1e-12):
                raise DimensionError("LMI matrices must be square symmetric, equal sides")
        try:
            np.linalg.cholesky(mats[0])
        except np.linalg.LinAlgError:
            raise ValueError("LMI first matrix must be positive definite") from None
        self.mats = mats
        self.side = side
        self.dim = len(mats)
        self.nu = float(side)

    def _lam(self, vec):
        acc = np.zeros((self.side, self.side))
        for coef, m in zip(vec, self.mats):
            acc += coef * m
        return [acc]

    def _lam_adj(self, blocks):
        w = blocks[0]
        return np.array([float(np.sum(m * w)) for m in self.mats])

    def _qs(self, s):
        # Q_i = L^{-1} P_i L^{-T}, stacked (dim, side, side)
        if "qs" not in self._c:
            low = self._c["chols"][0]
            qs = []
            for m in self.mats:
                half = solve_triangular(low, m, lower=True)
                qs.append(solve_triangular(low, half.T, lower=True).T)
            self._c["qs"] = np.stack(qs)
        return self._c["qs"]

    def _grad(self, s):
        return -np.trace(self._qs(s), axis1=1, axis2=2)

    def _happly(self, s, d):
        qs = self._qs(s)
        r = np.tensordot(d, qs, axes=(0, 0))
        return np.tensordot(qs, r, axes=([1, 2], [0, 1]))

    def _too(self, s, d):
        qs = self._qs(s)
        r = np.tensordot(d, qs, axes=(0, 0))
        return np.tensordot(qs, r @ r, axes=([1, 2], [0, 1]))

    def _hess(self, s):
        qmat = self._qs(s).reshape(self.dim, self.side * self.side)
        return qmat @ qmat.T

    # H is the Gram matrix of the vectorized Q_i, so a QR factorization of
    # the feature matrix reaches H = R'R while only paying the square root
    # of cond(H) in accuracy -- a dense factorization of H itself loses
    # twice the digits and fails the proximity identities near the boundary.
    def _gram_r(self, s):
        if "gramr" not in self._c:
            iu = np.triu_indices(self.side)
            wts = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
            feats = self._qs(s)[:, iu[0], iu[1]] * wts
            rfac = scipy_qr(feats.T, mode="r")[0][: self.dim, :]
            if np.any(np.abs(np.diag(rfac)) <= 0.0):
                raise NumericalFailure("LMI: Hessian Gram factor is singular")
            self._c["gramr"] = rfac
        return self._c["gramr"]

    def _ihq(self, s, r):
        half = solve_triangular(self._gram_r(s).T, r, lower=True)
        return float(half @ half)

    def _hsolve(self, s, r):
        rfac = self._gram_r(s)
        return solve_triangular(rfac, solve_triangular(rfac.T, r, lower=True))

    def initial_point(self):
        t = np.zeros(self.dim)
        t[0] = 1.0
        return t


class WsosDualScalar(_SliceCone):
    """Dual cone of scalar weighted sums-of-squares polynomials.

    Defined by interpolation basis matrices P_l (d x s_l, full column
    rank): w is interior iff every P_l' Diag(w) P_l is PD.  nu = sum s_l.
    """

    tag = "WSOS"

    def __init__(self, mats, use_dual: bool = False):
        super().__init__(use_dual)
        mats = [np.ascontiguousarray(m, dtype=float) for m in mats]
        if not mats:
            raise DimensionError("WSOS needs at least one basis matrix")
        d = mats[0].shape[0]
        for m in mats:
            if m.ndim != 2 or m.shape[0] != d or m.shape[1] > d:
                raise DimensionError("WSOS basis matrices must share row count, cols <= rows")
            if np.linalg.matrix_rank(m) < m.shape[1]:
                raise ValueError("WSOS basis matrices must have full column rank")
        self.mats = mats
        self.dim = d
        self.nu = float(sum(m.shape[1] for m in mats))

    def _lam(self, vec):
        return [m.T @ (vec[:, None] * m) for m in self.mats]

    def _lam_adj(self, blocks):
        out = np.zeros(self.dim)
        for m, w in zip(self.mats, blocks):
            out += np.einsum("ij,jk,ik->i", m, w, m)
        return out

    def _us(self, s):
        # U_l = P_l (Lambda_l)^{-1} P_l', cached per point
        if "us" not in self._c:
            us = []
            for m, low in zip(self.mats, self._c["chols"]):
                v = solve_triangular(low, m.T, lower=True).T
                us.append(v @ v.T)
            self._c["us"] = us
        return self._c["us"]

    def _hess(self, s):
        h = np.zeros((self.dim, self.dim))
        for u in self._us(s):
            h += u * u
        return h

    # H_ij = sum_l (v_i . v_j)^2 with v the rows of P_l L_l^{-T}, i.e. the
    # Gram matrix of the vectorized rank-one products v_i v_i'.  Factoring
    # the feature matrix by QR costs only sqrt(cond(H)) in accuracy, which
    # keeps the proximity identities reliable near the boundary.
    def _gram_r(self, s):
        if "gramr" not in self._c:
            blocks = []
            for m, low in zip(self.mats, self._c["chols"]):
                v = solve_triangular(low, m.T, lower=True).T
                cols = v.shape[1]
                iu = np.triu_indices(cols)
                wts = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
                blocks.append(v[:, iu[0]] * v[:, iu[1]] * wts)
            feats = np.hstack(blocks)
            rfac = scipy_qr(feats.T, mode="r")[0][: self.dim, :]
            if np.any(np.abs(np.diag(rfac)) <= 0.0):
                raise NumericalFailure("WSOS: Hessian Gram factor is singular")
            self._c["gramr"] = rfac
        return self._c["gramr"]

    def _ihq(self, s, r):
        half = solve_triangular(self._gram_r(s).T, r, lower=True)
        return float(half @ half)

    def _hsolve(self, s, r):
        rfac = self._gram_r(s)
        return solve_triangular(rfac, solve_triangular(rfac.T, r, lower=True))

    def initial_point(self):
        return np.ones(self.dim)


# ---------------------------------------------------------------------------
# Helpers

CONE_TYPES = {
    cls.tag: cls
    for cls in (Nonneg, PsdSvec, LinfEpi, L2Epi, SqrEpi, GenPower, PowerMean, GeoMean,
                LogPersp, Lmi, WsosDualScalar)
}


def random_interior_point(cone: Cone, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Sample a strictly feasible point by perturbing the initial point."""
    base = cone.initial_point()
    scale = spread * max(1.0, float(np.max(np.abs(base))))
    for _ in range(60):
        cand = base + scale * rng.standard_normal(cone.dim)
        if cone.is_feasible(cand):
            return cand
        scale *= 0.7
    return base.copy()
