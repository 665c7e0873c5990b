"""Model preprocessing: scaling, equality elimination, and witness lifting.

The solver works on a reduced problem

    min  c_r' x_r   s.t.  h_r - G_r x_r in K

obtained from the original model by (1) one-pass diagonal equilibration,
(2) eliminating the equality constraints through a pivoted QR of A', and
(3) dropping dependent columns of the reduced G through a second pivoted
QR.  Each step records enough to lift reduced-space witnesses back to the
original variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cones import Cone
from .errors import NumericalFailure
from .model import ConicModel, DUAL_INFEASIBLE, PRIMAL_INFEASIBLE

RANK_TOL = 1e-12


@dataclass
class InconsistencyReport:
    """Terminal result produced when preprocessing finds a contradiction."""

    status: str  # PRIMAL_INFEASIBLE or DUAL_INFEASIBLE
    detail: str
    witness: dict  # original-space Farkas ray


@dataclass
class PreprocessedModel:
    model: ConicModel
    cones: list[Cone]
    c: np.ndarray            # reduced objective
    G: np.ndarray            # reduced cone matrix (full column rank)
    h: np.ndarray            # reduced cone offset
    obj_offset: float        # c'x contribution of the particular solution
    # scaling diagonals
    dc: np.ndarray
    dr_a: np.ndarray
    dr_g: np.ndarray
    # equality elimination (QR of scaled A')
    x_part: np.ndarray       # particular solution of A2 x = b2 (scaled space)
    null_basis: np.ndarray   # n x n_free orthonormal basis of null(A2)
    a_q: np.ndarray
    a_r: np.ndarray
    a_perm: np.ndarray
    a_rank: int
    # dependent-column drop (QR of reduced G)
    keep_cols: np.ndarray    # indices into the n_free reduced variables
    n_free: int
    g_q: np.ndarray          # economic Q of G (kept columns, unpivoted order)
    g_r: np.ndarray
    cone_offsets: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def q(self) -> int:
        return self.G.shape[0]


def _block_row_scales(model: ConicModel) -> np.ndarray:
    """One positive scalar per cone block (geometric mean of row maxima)."""
    gh = np.column_stack([model.G, model.h]) if model.n else model.h[:, None]
    row_max = np.maximum(np.max(np.abs(gh), axis=1), 1e-8)
    dr = np.empty(model.q)
    for off, cone in zip(model.cone_offsets(), model.cones):
        block = row_max[off : off + cone.dim]
        dr[off : off + cone.dim] = 1.0 / np.sqrt(np.exp(np.mean(np.log(block))))
    return dr


def preprocess(model: ConicModel, rank_tol: float = RANK_TOL):
    """Reduce a model; returns PreprocessedModel or InconsistencyReport."""
    model.validate()
    n, p, q = model.n, model.p, model.q

    # --- one-pass equilibration ------------------------------------------
    if p:
        ab = np.column_stack([model.A, model.b])
        dr_a = 1.0 / np.sqrt(np.maximum(np.max(np.abs(ab), axis=1), 1e-8))
    else:
        dr_a = np.ones(0)
    dr_g = _block_row_scales(model)
    a2 = dr_a[:, None] * model.A
    g2 = dr_g[:, None] * model.G
    col_stack = np.vstack([a2, g2, model.c[None, :]])
    dc = 1.0 / np.sqrt(np.maximum(np.max(np.abs(col_stack), axis=0), 1e-8))
    a2 *= dc[None, :]
    g2 *= dc[None, :]
    c2 = dc * model.c
    b2 = dr_a * model.b
    h2 = dr_g * model.h
    scale = max(1.0, float(np.max(np.abs(b2))) if p else 0.0)

    # --- eliminate equalities via pivoted QR of A2' ------------------------
    if p:
        qa, ra, perm = scipy.linalg.qr(a2.T, mode="full", pivoting=True)
        diag = np.abs(np.diag(ra[: min(n, p), : min(n, p)]))
        top = diag[0] if len(diag) else 0.0
        rank = int(np.sum(diag > rank_tol * max(top, 1.0))) if top > 0 else 0
        pb = b2[perm]
        if rank < p:
            # Possibly contradictory equalities: the least-squares residual
            # of A2 x = b2 is a certificate ray (A2' r = 0, b2' r > 0).
            x_ls, *_ = np.linalg.lstsq(a2, b2, rcond=None)
            r2 = b2 - a2 @ x_ls
            if float(np.max(np.abs(r2), initial=0.0)) > 1e-8 * scale:
                return InconsistencyReport(
                    PRIMAL_INFEASIBLE, "equality constraints are contradictory",
                    {"y": dr_a * (-r2), "z": np.zeros(q)})
        if rank:
            v1 = scipy.linalg.solve_triangular(ra[:rank, :rank].T, pb[:rank], lower=True)
        else:
            v1 = np.zeros(0)
        x_part = qa[:, :rank] @ v1
        null_basis = qa[:, rank:]
    else:
        rank = 0
        qa = np.eye(n)
        ra = np.zeros((n, 0))
        perm = np.zeros(0, dtype=int)
        x_part = np.zeros(n)
        null_basis = np.eye(n)

    n_free = n - rank
    c_free = null_basis.T @ c2
    g_free = g2 @ null_basis
    h_red = h2 - g2 @ x_part
    obj_offset = float(c2 @ x_part)

    # --- drop dependent columns of the reduced G ---------------------------
    if n_free:
        qg, rg, perm_g = scipy.linalg.qr(g_free, mode="economic", pivoting=True)
        diag = np.abs(np.diag(rg))
        top = diag[0] if len(diag) else 0.0
        rank_g = int(np.sum(diag > rank_tol * max(top, 1.0))) if top > 0 else 0
    else:
        qg = np.zeros((q, 0))
        rg = np.zeros((0, 0))
        perm_g = np.zeros(0, dtype=int)
        rank_g = 0
    if rank_g < n_free:
        # Columns of G beyond rank_g are combinations of the kept ones; the
        # objective must agree or a primal improving ray exists.
        basic, dropped = perm_g[:rank_g], perm_g[rank_g:]
        t_mat = scipy.linalg.solve_triangular(rg[:rank_g, :rank_g], rg[:rank_g, rank_g:]) \
            if rank_g else np.zeros((0, len(dropped)))
        mismatch = c_free[dropped] - (t_mat.T @ c_free[basic] if rank_g else 0.0)
        cscale = max(1.0, float(np.max(np.abs(c_free))))
        bad = np.where(np.abs(mismatch) > 1e-8 * cscale)[0]
        if len(bad):
            j = bad[0]
            xi = np.zeros(n_free)
            xi[dropped[j]] = 1.0
            if rank_g:
                xi[basic] = -t_mat[:, j]
            if c_free @ xi > 0:
                xi = -xi
            x_ray = dc * (null_basis @ xi)
            return InconsistencyReport(
                DUAL_INFEASIBLE, "objective decreases along the null space of [A; G]",
                {"x": x_ray, "s": np.zeros(q)})
        keep = np.sort(basic)
    else:
        keep = np.arange(n_free)

    g_red = g_free[:, keep]
    c_red = c_free[keep]
    if g_red.shape[1]:
        g_q, g_r = scipy.linalg.qr(g_red, mode="economic")
    else:
        g_q, g_r = np.zeros((q, 0)), np.zeros((0, 0))

    pre = PreprocessedModel(
        model=model, cones=[cone.clone() for cone in model.cones],
        c=c_red, G=g_red, h=h_red, obj_offset=obj_offset,
        dc=dc, dr_a=dr_a, dr_g=dr_g,
        x_part=x_part, null_basis=null_basis,
        a_q=qa, a_r=ra, a_perm=perm, a_rank=rank,
        keep_cols=keep, n_free=n_free, g_q=g_q, g_r=g_r,
    )
    pre.cone_offsets = model.cone_offsets()
    return pre


# ---------------------------------------------------------------------------
# Initial iterate


@dataclass
class Iterate:
    """Point of the embedded self-dual path in reduced coordinates."""

    x: np.ndarray
    z: np.ndarray
    tau: float
    s: np.ndarray
    kappa: float

    def copy(self) -> "Iterate":
        return Iterate(self.x.copy(), self.z.copy(), self.tau, self.s.copy(), self.kappa)


def initial_iterate(pre: PreprocessedModel) -> Iterate:
    """Unit-path start: each cone at its initial point, tau = kappa = 1.

    The x block is the least-squares minimum-norm fit of the cone equation,
    which keeps the first residual small without affecting path validity.
    """
    s0 = np.empty(pre.q)
    z0 = np.empty(pre.q)
    for off, cone in zip(pre.cone_offsets, pre.cones):
        sl = slice(off, off + cone.dim)
        t = cone.initial_point()
        g = cone.clone().gradient(t)
        if cone.use_dual:
            z0[sl], s0[sl] = t, -g
        else:
            z0[sl], s0[sl] = -g, t
    if pre.n:
        x0 = scipy.linalg.solve_triangular(pre.g_r, pre.g_q.T @ (pre.h - s0))
    else:
        x0 = np.zeros(0)
    return Iterate(x0, z0, 1.0, s0, 1.0)


def barrier_total(pre: PreprocessedModel) -> float:
    """Sum of cone barrier parameters plus one for the tau/kappa pair."""
    return float(sum(cone.nu for cone in pre.cones)) + 1.0


def complementarity(it: Iterate) -> float:
    return float(it.s @ it.z + it.tau * it.kappa)


def mu_of(pre: PreprocessedModel, it: Iterate) -> float:
    return complementarity(it) / barrier_total(pre)


# ---------------------------------------------------------------------------
# Lifting reduced witnesses to the original space


def lift_primal(pre: PreprocessedModel, x_red: np.ndarray, tau: float) -> np.ndarray:
    """Original-space x from the reduced x at a given tau."""
    xi = np.zeros(pre.n_free)
    xi[pre.keep_cols] = x_red
    x2 = pre.x_part * tau + pre.null_basis @ xi
    return pre.dc * x2


def lift_dual(pre: PreprocessedModel, z_red: np.ndarray, tau: float):
    """Original-space (y, z) from the reduced z; y is the minimum-norm fit."""
    model = pre.model
    z = pre.dr_g * z_red
    if model.p:
        c2 = pre.dc * model.c
        g2t_z = (pre.dr_g[:, None] * model.G * pre.dc[None, :]).T @ z_red
        rhs = -(g2t_z + c2 * tau)
        t = pre.a_q.T @ rhs
        rank = pre.a_rank
        r_top = pre.a_r[:rank, :]  # rank x p upper trapezoid
        u, *_ = np.linalg.lstsq(r_top, t[:rank], rcond=None)
        y2 = np.zeros(model.p)
        y2[pre.a_perm] = u
        y = pre.dr_a * y2
    else:
        y = np.zeros(0)
    return y, z


def lift_slack(pre: PreprocessedModel, s_red: np.ndarray) -> np.ndarray:
    return s_red / pre.dr_g
