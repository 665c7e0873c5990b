"""Solve driver: preprocessing, iteration loop, termination, certificates."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalFailure
from .kkt import KktFactorization
from .model import (CertificateReport, ConicModel, DUAL_INFEASIBLE, ILL_POSED, OPTIMAL,
                    PRIMAL_INFEASIBLE, STALLED, verify_certificate)
from .preprocess import (InconsistencyReport, Iterate, PreprocessedModel, initial_iterate,
                         lift_dual, lift_primal, lift_slack, mu_of, preprocess)
from .stepper import Stepper, residual_rhs

_EPS = float(np.finfo(float).eps)

STALL_WINDOW = 8
STALL_IMPROVEMENT = 0.01


@dataclass
class SolverOptions:
    stepper: str = "comb"
    eps_feas: float = 10.0 * _EPS**0.5
    eps_rel: float = 10.0 * _EPS**0.5
    eps_inf: float = 10.0 * _EPS**0.75
    eps_abs: float = 10.0 * _EPS**0.75
    eps_path: float = 0.1 * _EPS**0.75
    max_iters: int | None = None
    verbose: bool = False


@dataclass
class IterationRecord:
    index: int
    mu: float
    tau: float
    kappa: float
    kind: str
    alpha: float
    prox: float
    worst_residual: float


@dataclass
class SolveResult:
    status: str
    iterations: int
    primal_objective: float | None = None
    dual_objective: float | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    tau: float = float("nan")
    kappa: float = float("nan")
    certificate: CertificateReport | None = None
    timings: dict[str, float] = field(default_factory=dict)
    trace: list[IterationRecord] = field(default_factory=list)
    factorizations: int = 0
    direction_solves: int = 0
    solve_seconds: float = 0.0
    detail: str = ""


class _Timers:
    """Disjoint wall-clock buckets: init, lhs, rhs+direction, search."""

    def __init__(self):
        self.buckets = {"init": 0.0, "lhs": 0.0, "rhs": 0.0, "direc": 0.0, "search": 0.0}
        self._start = None
        self._bucket = None

    def start(self, bucket: str):
        now = time.perf_counter()
        if self._bucket is not None:
            self.buckets[self._bucket] += now - self._start
        self._bucket, self._start = bucket, now

    def stop(self):
        if self._bucket is not None:
            self.buckets[self._bucket] += time.perf_counter() - self._start
            self._bucket = None


def convergence_residuals(pre: PreprocessedModel, it: Iterate) -> dict[str, float]:
    """Scaled residual magnitudes used by every termination test."""
    c, h = pre.c, pre.h
    r_x, r_s, _ = residual_rhs(pre, it)
    inf = lambda v: float(np.max(np.abs(v))) if np.size(v) else 0.0
    return {
        "dual_eq": inf(r_x) / (1.0 + inf(c)),
        "primal_eq": inf(r_s) / (1.0 + inf(h)),
        "gap": float(it.s @ it.z),
        "cx": float(c @ it.x),
        "hz": float(h @ it.z),
        "dual_ray": inf(pre.G.T @ it.z),
        "primal_ray": inf(pre.G @ it.x + it.s),
    }


def check_convergence(pre: PreprocessedModel, it: Iterate, opt: SolverOptions):
    """Return a terminal status or None, plus the residual dict."""
    r = convergence_residuals(pre, it)
    tau, kappa = it.tau, it.kappa
    # optimality
    if tau > 0 and max(r["dual_eq"], r["primal_eq"]) <= opt.eps_feas * tau:
        gap_ok = r["gap"] <= opt.eps_abs
        if not gap_ok:
            lhs = min(r["gap"] / tau, abs(r["cx"] + r["hz"]))
            rhs = opt.eps_rel * max(tau, min(abs(r["cx"]), abs(r["hz"])))
            gap_ok = lhs <= rhs
        if gap_ok:
            return OPTIMAL, r
    # primal infeasibility (dual improving ray)
    if r["hz"] < 0 and r["dual_ray"] <= -opt.eps_inf * r["hz"]:
        return PRIMAL_INFEASIBLE, r
    # dual infeasibility (primal improving ray)
    if r["cx"] < 0 and r["primal_ray"] <= -opt.eps_inf * r["cx"]:
        return DUAL_INFEASIBLE, r
    # ill-posed: path converges with tau and kappa both vanishing
    mu = mu_of(pre, it)
    if mu <= opt.eps_path and tau <= opt.eps_path * min(1.0, kappa):
        return ILL_POSED, r
    return None, r


def _worst_convergence_residual(r: dict[str, float], it: Iterate) -> float:
    tau = max(it.tau, 1e-300)
    return max(r["dual_eq"] / tau, r["primal_eq"] / tau, r["gap"])


def detect_stall(history: list[tuple[float, float]]) -> bool:
    """True when a window of prediction steps improved neither mu nor the
    worst residual by the minimum relative amount."""
    if len(history) < STALL_WINDOW + 1:
        return False
    mu_then, res_then = history[-STALL_WINDOW - 1]
    mu_now, res_now = history[-1]
    mu_gain = 1.0 - mu_now / mu_then if mu_then > 0 else 0.0
    res_gain = 1.0 - res_now / res_then if res_then > 0 else 0.0
    return mu_gain < STALL_IMPROVEMENT and res_gain < STALL_IMPROVEMENT


def _terminal_result(model: ConicModel, pre: PreprocessedModel, it: Iterate, status: str,
                     opt: SolverOptions, detail: str = "") -> SolveResult:
    res = SolveResult(status=status, iterations=0, tau=it.tau, kappa=it.kappa, detail=detail)
    if status == OPTIMAL:
        x = lift_primal(pre, it.x / it.tau, 1.0)
        y, z = lift_dual(pre, it.z / it.tau, 1.0)
        s = lift_slack(pre, it.s / it.tau)
        res.x, res.y, res.z, res.s = x, y, z, s
        res.primal_objective = float(model.c @ x)
        res.dual_objective = float(-model.b @ y - model.h @ z)
        res.certificate = verify_certificate(model, status, {"x": x, "y": y, "z": z, "s": s},
                                             opt.eps_feas, opt.eps_inf)
    elif status == PRIMAL_INFEASIBLE:
        y, z = lift_dual(pre, it.z, 0.0)
        res.y, res.z = y, z
        res.certificate = verify_certificate(model, status, {"y": y, "z": z},
                                             opt.eps_feas, opt.eps_inf)
    elif status == DUAL_INFEASIBLE:
        x = lift_primal(pre, it.x, 0.0)
        s = lift_slack(pre, it.s)
        res.x, res.s = x, s
        res.certificate = verify_certificate(model, status, {"x": x, "s": s},
                                             opt.eps_feas, opt.eps_inf)
    return res


def _from_inconsistency(model: ConicModel, rep: InconsistencyReport,
                        opt: SolverOptions) -> SolveResult:
    res = SolveResult(status=rep.status, iterations=0, detail=rep.detail)
    w = rep.witness
    if rep.status == PRIMAL_INFEASIBLE:
        res.y, res.z = w["y"], w["z"]
    else:
        res.x, res.s = w["x"], w["s"]
    res.certificate = verify_certificate(model, rep.status, w, opt.eps_feas, opt.eps_inf)
    return res


def solve(model: ConicModel, options: SolverOptions | None = None) -> SolveResult:
    """Run the interior-point iteration on a conic model."""
    opt = options or SolverOptions()
    timers = _Timers()
    t_begin = time.perf_counter()
    timers.start("init")
    reduced = preprocess(model)
    if isinstance(reduced, InconsistencyReport):
        timers.stop()
        out = _from_inconsistency(model, reduced, opt)
        out.timings = timers.buckets
        out.solve_seconds = time.perf_counter() - t_begin
        return out
    pre = reduced
    it = initial_iterate(pre)
    stepper = Stepper(pre, opt.stepper)
    timers.stop()

    trace: list[IterationRecord] = []
    pred_history: list[tuple[float, float]] = []
    n_fact = 0
    n_direc = 0
    status, detail = None, ""
    iters = 0

    while True:
        term, resid = check_convergence(pre, it, opt)
        if term is not None:
            status = term
            break
        if opt.max_iters is not None and iters >= opt.max_iters:
            status, detail = STALLED, "iteration limit reached"
            break
        if detect_stall(pred_history):
            status, detail = STALLED, "no progress over the stall window"
            break
        mu = mu_of(pre, it)
        kkt = None
        try:
            timers.start("lhs")
            kkt = KktFactorization(pre, it, mu)
            n_fact += 1
            timers.start("search")
            rhs_before = stepper.rhs_seconds
            step = stepper.step(it, kkt)
            timers.stop()
        except NumericalFailure as exc:
            timers.stop()
            status, detail = STALLED, f"numerical failure: {exc}"
            break
        # The step bucket mixes rhs construction, direction solves, and the
        # backtracking search; reattribute the first two to their buckets.
        rhs_dt = stepper.rhs_seconds - rhs_before
        timers.buckets["rhs"] += rhs_dt
        timers.buckets["direc"] += kkt.solve_seconds
        timers.buckets["search"] -= rhs_dt + kkt.solve_seconds
        n_direc += kkt.solves
        if step is None:
            status, detail = STALLED, "backtracking search failed"
            break
        it = step.iterate
        iters += 1
        rec = IterationRecord(iters, mu_of(pre, it), it.tau, it.kappa, step.kind,
                              step.alpha, float(np.max(step.pi)),
                              _worst_convergence_residual(convergence_residuals(pre, it), it))
        trace.append(rec)
        if step.used_prediction:
            pred_history.append((rec.mu, rec.worst_residual))
        if opt.verbose:
            print(f"  iter {iters:4d}  mu={rec.mu:10.3e}  tau={it.tau:9.3e}  "
                  f"{step.kind:5s} alpha={step.alpha:7.4f}")

    out = _terminal_result(model, pre, it, status, opt, detail) if status != STALLED \
        else SolveResult(status=STALLED, iterations=0, tau=it.tau, kappa=it.kappa, detail=detail)
    out.iterations = iters
    out.trace = trace
    out.timings = timers.buckets
    out.factorizations = n_fact
    out.direction_solves = n_direc
    out.solve_seconds = time.perf_counter() - t_begin
    return out
