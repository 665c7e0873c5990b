"""Stepping procedures along the embedded central path.

Five procedures are provided:

* ``basic`` -- alternate centering/prediction with an l2 proximity gate
* ``prox``  -- the same skeleton under a much looser l-inf proximity gate
* ``toa``   -- adds a third-order adjustment direction with two searches
* ``curve`` -- single search along the quadratic curve blending the
  unadjusted and adjustment directions
* ``comb``  -- one search along a curve mixing prediction and centering
  (with their adjustments), falling back to a centering curve step

All share one backtracking search over a fixed multiplicative schedule and
one candidate-acceptance test (the proximity prefilter).
"""

from __future__ import annotations

from dataclasses import dataclass
from time import perf_counter as _clock

import numpy as np

from .errors import NumericalFailure
from .kkt import Direction, DirectionRhs, KktFactorization
from .preprocess import Iterate, PreprocessedModel, barrier_total, mu_of

# Pinned stepping constants.
ETA = 0.0332          # proximity below which prediction is allowed
CENT_MAX = 4          # consecutive centering steps before forcing prediction
BETA_BASIC = 0.2844   # l2 proximity bound for the basic procedure
BETA_LOOSE = 0.99     # l-inf proximity bound for the enhanced procedures
SCHED_LEN = 18
ALPHA_MAX = 0.9999
ALPHA_MIN = 0.0005
SCHEDULE = np.geomspace(ALPHA_MAX, ALPHA_MIN, SCHED_LEN)

LHCHECK_TOL = 1e-6

MODES = ("basic", "prox", "toa", "curve", "comb")


# ---------------------------------------------------------------------------
# Proximity


def _cone_views(pre: PreprocessedModel, it: Iterate):
    """Yield (cone, z_bar, s_bar) with the dual swap applied, plus tau/kappa."""
    for off, cone in zip(pre.cone_offsets, pre.cones):
        sl = slice(off, off + cone.dim)
        if cone.use_dual:
            yield cone, it.s[sl], it.z[sl]
        else:
            yield cone, it.z[sl], it.s[sl]


def prox_lower_bounds(pre: PreprocessedModel, it: Iterate, mu: float) -> np.ndarray:
    """Cheap per-cone lower bounds nu^{-1/2} |s'z/mu - nu| on the proximity."""
    vals = []
    for cone, zbar, sbar in _cone_views(pre, it):
        vals.append(abs(float(sbar @ zbar) / mu - cone.nu) / np.sqrt(cone.nu))
    vals.append(abs(it.tau * it.kappa / mu - 1.0))
    return np.array(vals)


def proximities(pre: PreprocessedModel, it: Iterate, mu: float) -> np.ndarray:
    """Per-cone proximity ||H^{-1/2}(z/mu + g)||; inf if out of domain."""
    vals = []
    for cone, zbar, sbar in _cone_views(pre, it):
        if mu <= 0.0 or not cone.is_feasible(sbar):
            vals.append(np.inf)
            continue
        r = zbar / mu + cone.gradient(sbar)
        vals.append(np.sqrt(max(0.0, cone.inv_hess_quad(sbar, r))))
    if mu <= 0.0 or it.tau <= 0.0:
        vals.append(np.inf)
    else:
        vals.append(abs(it.tau * it.kappa / mu - 1.0))
    return np.array(vals)


@dataclass
class PrefilterResult:
    accepted: bool
    stage: int            # 0 if accepted, else 1..5 (which gate failed)
    pi: np.ndarray | None  # per-cone proximities when stage >= 5 reached
    aggregate: float = np.inf


def prox_prefilter(pre: PreprocessedModel, it: Iterate, bound: float,
                   agg: str = "inf") -> PrefilterResult:
    """Cheap-to-expensive acceptance gates for a candidate iterate.

    Stages: (1) positive per-cone complementarity products, (2) proximity
    lower bounds below the bound, (3) interiority of every s-bar block,
    (4) gradient/Hessian consistency identities, (5) exact proximities
    below the bound (aggregated by ``agg``: "inf" or "l2").
    """
    mu = mu_of(pre, it)
    if mu <= 0.0 or it.tau <= 0.0 or it.kappa <= 0.0:
        return PrefilterResult(False, 1, None)
    for cone, zbar, sbar in _cone_views(pre, it):
        if float(sbar @ zbar) <= 0.0:
            return PrefilterResult(False, 1, None)
    rho = prox_lower_bounds(pre, it, mu)
    if np.max(rho) >= bound:
        return PrefilterResult(False, 2, None)
    pis = []
    for cone, zbar, sbar in _cone_views(pre, it):
        if not cone.is_feasible(sbar):
            return PrefilterResult(False, 3, None)
        try:
            g = cone.gradient(sbar)
            ghg = cone.inv_hess_quad(sbar, g)
        except NumericalFailure:
            # Numerically on the boundary: treat like the identity check failing.
            return PrefilterResult(False, 4, None)
        if abs(-float(sbar @ g) - cone.nu) > LHCHECK_TOL * cone.nu or \
           abs(ghg - cone.nu) > LHCHECK_TOL * cone.nu:
            return PrefilterResult(False, 4, None)
        r = zbar / mu + g
        pi = np.sqrt(max(0.0, cone.inv_hess_quad(sbar, r)))
        if pi >= bound:
            return PrefilterResult(False, 5, None)
        pis.append(pi)
    pis.append(abs(it.tau * it.kappa / mu - 1.0))
    pi_vec = np.array(pis)
    total = float(np.linalg.norm(pi_vec)) if agg == "l2" else float(np.max(pi_vec))
    if total >= bound:
        return PrefilterResult(False, 5, pi_vec, total)
    return PrefilterResult(True, 0, pi_vec, total)


# ---------------------------------------------------------------------------
# Right-hand sides for the four direction types


def residual_rhs(pre: PreprocessedModel, it: Iterate):
    """The three linear residual blocks of the embedding at the iterate."""
    r_x = pre.G.T @ it.z + pre.c * it.tau
    r_s = -pre.G @ it.x + pre.h * it.tau - it.s
    r_tau = -float(pre.c @ it.x) - float(pre.h @ it.z) - it.kappa
    return r_x, r_s, r_tau


def rhs_centering(pre: PreprocessedModel, it: Iterate, mu: float) -> DirectionRhs:
    r_cone = np.empty(pre.q)
    pos = 0
    for cone, zbar, sbar in _cone_views(pre, it):
        r_cone[pos : pos + cone.dim] = -zbar - mu * cone.gradient(sbar)
        pos += cone.dim
    r_kap = -it.kappa + mu / it.tau
    return DirectionRhs(np.zeros(pre.n), np.zeros(pre.q), 0.0, r_cone, r_kap, "cent")


def rhs_prediction(pre: PreprocessedModel, it: Iterate) -> DirectionRhs:
    r_x, r_s, r_tau = residual_rhs(pre, it)
    r_cone = np.empty(pre.q)
    pos = 0
    for cone, zbar, sbar in _cone_views(pre, it):
        r_cone[pos : pos + cone.dim] = -zbar
        pos += cone.dim
    return DirectionRhs(-r_x, -r_s, -r_tau, r_cone, -it.kappa, "pred")


def _dir_sbar(pre: PreprocessedModel, d: Direction, off: int, cone) -> np.ndarray:
    sl = slice(off, off + cone.dim)
    return d.dz[sl] if cone.use_dual else d.ds[sl]


def rhs_centering_adj(pre: PreprocessedModel, it: Iterate, mu: float,
                      d_cent: Direction) -> DirectionRhs:
    r_cone = np.empty(pre.q)
    for off, (cone, zbar, sbar) in zip(pre.cone_offsets, _cone_views(pre, it)):
        sl = slice(off, off + cone.dim)
        r_cone[sl] = mu * cone.too(sbar, _dir_sbar(pre, d_cent, off, cone))
    r_kap = mu * d_cent.dtau**2 / it.tau**3
    return DirectionRhs(np.zeros(pre.n), np.zeros(pre.q), 0.0, r_cone, r_kap, "cent-adj")


def rhs_prediction_adj(pre: PreprocessedModel, it: Iterate, mu: float,
                       d_pred: Direction) -> DirectionRhs:
    r_cone = np.empty(pre.q)
    for off, (cone, zbar, sbar) in zip(pre.cone_offsets, _cone_views(pre, it)):
        sl = slice(off, off + cone.dim)
        dsb = _dir_sbar(pre, d_pred, off, cone)
        r_cone[sl] = mu * cone.hessian_apply(sbar, dsb) + mu * cone.too(sbar, dsb)
    r_kap = mu * d_pred.dtau / it.tau**2 + mu * d_pred.dtau**2 / it.tau**3
    return DirectionRhs(np.zeros(pre.n), np.zeros(pre.q), 0.0, r_cone, r_kap, "pred-adj")


# ---------------------------------------------------------------------------
# Searches


def _advance(it: Iterate, d: Direction, t: float) -> Iterate:
    return Iterate(it.x + t * d.dx, it.z + t * d.dz, it.tau + t * d.dtau,
                   it.s + t * d.ds, it.kappa + t * d.dkappa)


def backtrack(pre: PreprocessedModel, it: Iterate, candidate, bound: float, agg: str):
    """First schedule step whose candidate passes the prefilter.

    ``candidate(alpha)`` maps a step size to a trial iterate.  Returns
    (alpha, iterate, prefilter) or None when the schedule is exhausted.
    """
    for alpha in SCHEDULE:
        trial = candidate(float(alpha))
        res = prox_prefilter(pre, trial, bound, agg)
        if res.accepted:
            return float(alpha), trial, res
    return None


def line_candidate(it: Iterate, d: Direction):
    return lambda a: _advance(it, d, a)


def curve_candidate(it: Iterate, d_un: Direction, d_adj: Direction):
    """Quadratic trajectory omega + a * (d_un + a * d_adj)."""
    return lambda a: _advance(_advance(it, d_un, a), d_adj, a * a)


def comb_candidate(it: Iterate, d_pred: Direction, d_pred_adj: Direction,
                   d_cent: Direction, d_cent_adj: Direction):
    """Mixing curve: a*(pred + a*pred_adj) + (1-a)*(cent + (1-a)*cent_adj)."""

    def cand(a: float) -> Iterate:
        out = _advance(it, d_pred, a)
        out = _advance(out, d_pred_adj, a * a)
        out = _advance(out, d_cent, 1.0 - a)
        return _advance(out, d_cent_adj, (1.0 - a) ** 2)

    return cand


# ---------------------------------------------------------------------------
# Stepping procedures


@dataclass
class StepResult:
    iterate: Iterate
    kind: str          # "cent", "pred", "comb", ...
    alpha: float
    pi: np.ndarray     # per-cone proximities at the accepted iterate
    used_prediction: bool


@dataclass
class Stepper:
    """Owns mode-specific stepping state (the consecutive-centering count)."""

    pre: PreprocessedModel
    mode: str = "comb"
    cent_streak: int = 0
    last_pi: np.ndarray | None = None
    rhs_seconds: float = 0.0

    def _rhs(self, builder, *args):
        t0 = _clock()
        try:
            return builder(*args)
        finally:
            self.rhs_seconds += _clock() - t0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown stepping mode {self.mode!r}; choose from {MODES}")

    @property
    def _bound(self) -> float:
        return BETA_BASIC if self.mode == "basic" else BETA_LOOSE

    @property
    def _agg(self) -> str:
        return "l2" if self.mode == "basic" else "inf"

    def _aggregate(self, pi: np.ndarray) -> float:
        return float(np.linalg.norm(pi)) if self._agg == "l2" else float(np.max(pi))

    def step(self, it: Iterate, kkt: KktFactorization) -> StepResult | None:
        """One iteration; None means the search failed (numerical stall)."""
        if self.mode in ("basic", "prox", "toa"):
            return self._step_alternating(it, kkt)
        if self.mode == "curve":
            return self._step_curve(it, kkt)
        return self._step_comb(it, kkt)

    # -- helpers ------------------------------------------------------------

    def _current_aggregate(self, it: Iterate, mu: float) -> float:
        if self.last_pi is not None:
            return self._aggregate(self.last_pi)
        return self._aggregate(proximities(self.pre, it, mu))

    def _want_prediction(self, it: Iterate, mu: float) -> bool:
        if self.cent_streak >= CENT_MAX:
            return True
        return self._current_aggregate(it, mu) <= ETA

    def _finish(self, accepted, kind: str, predicted: bool) -> StepResult:
        alpha, trial, res = accepted
        self.last_pi = res.pi
        self.cent_streak = 0 if predicted else self.cent_streak + 1
        return StepResult(trial, kind, alpha, res.pi, predicted)

    # -- alternating centering / prediction (basic, prox, toa) --------------

    def _step_alternating(self, it: Iterate, kkt: KktFactorization) -> StepResult | None:
        pre, mu = self.pre, kkt.mu
        predict = self._want_prediction(it, mu)
        if predict:
            d_un = kkt.solve(self._rhs(rhs_prediction, pre, it))
            kind = "pred"
        else:
            d_un = kkt.solve(self._rhs(rhs_centering, pre, it, mu))
            kind = "cent"
        if self.mode == "toa":
            if predict:
                d_adj = kkt.solve(self._rhs(rhs_prediction_adj, pre, it, mu, d_un))
            else:
                d_adj = kkt.solve(self._rhs(rhs_centering_adj, pre, it, mu, d_un))
            first = backtrack(pre, it, line_candidate(it, d_un), self._bound, self._agg)
            if first is None:
                return None
            alpha_un = first[0]
            combined = d_un.plus(d_adj.scaled(alpha_un))
            second = backtrack(pre, it, line_candidate(it, combined), self._bound, self._agg)
            accepted = second if second is not None else first
        else:
            accepted = backtrack(pre, it, line_candidate(it, d_un), self._bound, self._agg)
            if accepted is None:
                return None
        return self._finish(accepted, kind, predict)

    # -- curve variant (single search on the quadratic trajectory) ----------

    def _step_curve(self, it: Iterate, kkt: KktFactorization) -> StepResult | None:
        pre, mu = self.pre, kkt.mu
        predict = self._want_prediction(it, mu)
        if predict:
            d_un = kkt.solve(self._rhs(rhs_prediction, pre, it))
            d_adj = kkt.solve(self._rhs(rhs_prediction_adj, pre, it, mu, d_un))
            kind = "pred"
        else:
            d_un = kkt.solve(self._rhs(rhs_centering, pre, it, mu))
            d_adj = kkt.solve(self._rhs(rhs_centering_adj, pre, it, mu, d_un))
            kind = "cent"
        accepted = backtrack(pre, it, curve_candidate(it, d_un, d_adj), self._bound, self._agg)
        if accepted is None:
            return None
        return self._finish(accepted, kind, predict)

    # -- combined prediction+centering curve --------------------------------

    def _step_comb(self, it: Iterate, kkt: KktFactorization) -> StepResult | None:
        pre, mu = self.pre, kkt.mu
        d_cent = kkt.solve(self._rhs(rhs_centering, pre, it, mu))
        d_cent_adj = kkt.solve(self._rhs(rhs_centering_adj, pre, it, mu, d_cent))
        d_pred = kkt.solve(self._rhs(rhs_prediction, pre, it))
        d_pred_adj = kkt.solve(self._rhs(rhs_prediction_adj, pre, it, mu, d_pred))
        cand = comb_candidate(it, d_pred, d_pred_adj, d_cent, d_cent_adj)
        accepted = backtrack(pre, it, cand, self._bound, self._agg)
        if accepted is not None:
            alpha, trial, res = accepted
            self.last_pi = res.pi
            self.cent_streak = 0
            return StepResult(trial, "comb", alpha, res.pi, True)
        # Fallback: pure centering along its quadratic trajectory.
        accepted = backtrack(pre, it, curve_candidate(it, d_cent, d_cent_adj),
                             self._bound, self._agg)
        if accepted is None:
            return None
        return self._finish(accepted, "cent", False)
