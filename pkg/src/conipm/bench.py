"""Desk-scale benchmark harness.

Seeded instance generators, a suite runner that exercises every stepping
procedure, and the aggregate metrics used to compare them: shifted
geometric means and performance-profile coordinates.  The harness emits
delimited output only; rendering is left to callers.
"""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cones import (GenPower, GeoMean, L2Epi, LinfEpi, Lmi, LogPersp, Nonneg,
                    PowerMean, PsdSvec, SqrEpi, WsosDualScalar, random_interior_point)
from .model import (ConicModel, DUAL_INFEASIBLE, OPTIMAL, PRIMAL_INFEASIBLE,
                    build_model)
from .solver import SolverOptions, solve
from .stepper import MODES
from .svec import svec

# Shifts for the shifted geometric means: one iteration, one millisecond.
ITER_SHIFT = 1.0
TIME_SHIFT_MS = 1.0

SUCCESS_STATUSES = frozenset({OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE})

RUN_FIELDS = ("instance", "mode", "status", "iters", "solve_ms",
              "init_ms", "lhs_ms", "rhs_ms", "direc_ms", "search_ms")
AGG_FIELDS = ("mode", "set", "conv", "iters_sgm", "time_sgm")


# ---------------------------------------------------------------------------
# Instance specifications


@dataclass(frozen=True)
class InstanceSpec:
    """Named, seeded description of one benchmark instance.

    The same (generator, params, seed) triple always reproduces an
    identical model, bit for bit.
    """

    generator: str
    seed: int
    params: tuple[tuple[str, object], ...] = ()

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    @property
    def name(self) -> str:
        bits = [self.generator]
        bits += [f"{k}{v}" for k, v in self.params]
        bits.append(f"s{self.seed}")
        return "_".join(bits)


def spec(generator: str, seed: int, **params) -> InstanceSpec:
    """Convenience constructor with keyword parameters."""
    return InstanceSpec(generator, seed, tuple(sorted(params.items())))


# ---------------------------------------------------------------------------
# Generators


def _model_interior(cone, rng, spread=0.5):
    """Interior point of the cone as it appears in the model."""
    pt = random_interior_point(cone.clone(), rng, spread)
    if cone.use_dual:
        return -cone.clone().gradient(pt)
    return pt


def _dual_interior(cone, rng, spread=0.5):
    """Interior point of the dual of the cone as it appears in the model."""
    pt = random_interior_point(cone.clone(), rng, spread)
    if cone.use_dual:
        return pt
    return -cone.clone().gradient(pt)


def _feasible_completion(rng, cones, n, p=0, G=None, A=None) -> ConicModel:
    """Random instance that is strictly feasible on both sides.

    The primal interior point fixes (b, h); the dual interior point fixes
    c, so a zero-gap optimum is guaranteed to exist.
    """
    q = sum(c.dim for c in cones)
    if G is None:
        G = rng.standard_normal((q, n))
    if A is None:
        A = rng.standard_normal((p, n)) if p else np.zeros((0, n))
    x0 = rng.standard_normal(n)
    b = A @ x0
    s0 = np.concatenate([_model_interior(c, rng) for c in cones])
    h = G @ x0 + s0
    z0 = np.concatenate([_dual_interior(c, rng) for c in cones])
    y0 = rng.standard_normal(p) if p else np.zeros(0)
    c_vec = -A.T @ y0 - G.T @ z0
    return build_model(c_vec, A, b, G, h, cones)


def gen_lp_random(s: InstanceSpec) -> ConicModel:
    """Random feasible-and-bounded LP over a single nonnegative block."""
    rng = np.random.default_rng(s.seed)
    n = int(s.param("n", 10))
    p = int(s.param("p", 3))
    q = int(s.param("q", n + 5))
    return _feasible_completion(rng, [Nonneg(q)], n, p)


def gen_lp_infeasible(s: InstanceSpec) -> ConicModel:
    """LP whose inequalities conflict: x_1 >= 1 together with -x_1 >= 0.

    Detecting it requires the improving-ray termination test (the conflict
    involves no redundant equality rows, so preprocessing cannot see it).
    """
    rng = np.random.default_rng(s.seed)
    n = int(s.param("n", 4))
    extra = n + 2
    G = np.zeros((2 + extra, n))
    h = np.zeros(2 + extra)
    G[0, 0], h[0] = -1.0, -1.0      # s_1 = x_1 - 1
    G[1, 0], h[1] = 1.0, 0.0        # s_2 = -x_1
    # Satisfiable filler rows keep the instance from being a toy.
    Gf = rng.standard_normal((extra, n))
    xf = rng.standard_normal(n)
    G[2:] = Gf
    h[2:] = Gf @ xf + rng.uniform(0.5, 1.5, extra)
    c = rng.standard_normal(n)
    return build_model(c, np.zeros((0, n)), np.zeros(0),
                       G, h, [Nonneg(2 + extra)])


def gen_portfolio(s: InstanceSpec) -> ConicModel:
    """Budgeted allocation with box, Euclidean-risk and max-weight limits."""
    rng = np.random.default_rng(s.seed)
    d = int(s.param("d", 8))
    dual_linf = bool(s.param("dual", 0))
    F = rng.standard_normal((d, d)) / np.sqrt(d)
    x0 = np.full(d, 1.0 / d)
    gamma = 1.25 * float(np.linalg.norm(F @ x0))
    wcap = 1.25 if dual_linf else 1.25 / d
    A = np.ones((1, d))
    b = np.array([1.0])
    blocks = []
    # x >= 0
    blocks.append((-np.eye(d), np.zeros(d), Nonneg(d)))
    # (gamma, F x) in the Euclidean-norm epigraph
    g2 = np.vstack([np.zeros((1, d)), -F])
    h2 = np.concatenate([[gamma], np.zeros(d)])
    blocks.append((g2, h2, L2Epi(d)))
    # (wcap, x): max-norm cap, or its dual (an l1 cap) when flagged
    g3 = np.vstack([np.zeros((1, d)), -np.eye(d)])
    h3 = np.concatenate([[wcap], np.zeros(d)])
    blocks.append((g3, h3, LinfEpi(d, use_dual=dual_linf)))
    G = np.vstack([blk[0] for blk in blocks])
    h = np.concatenate([blk[1] for blk in blocks])
    c = -rng.uniform(0.5, 1.5, d)
    return build_model(c, A, b, G, h, [blk[2] for blk in blocks])


def gen_maxvolume(s: InstanceSpec) -> ConicModel:
    """Largest box/mean objective under bound and norm constraints.

    The ``family`` parameter picks the hypograph (or epigraph) cone:
    geom, power, gpower, log, or sqr.
    """
    rng = np.random.default_rng(s.seed)
    d = int(s.param("d", 6))
    family = str(s.param("family", "geom"))
    ub = rng.uniform(1.0, 3.0, d)
    nvar = 1 + d            # (t, x)
    blocks = []

    def head_block(cone, h_head):
        # slack (t, extras..., x) with constants injected through h
        extra = cone.dim - 1 - d
        g = np.zeros((cone.dim, nvar))
        g[0, 0] = -1.0
        g[1 + extra:, 1:] = -np.eye(d)
        h = np.zeros(cone.dim)
        h[1:1 + extra] = h_head
        return g, h, cone

    if family == "geom":
        blocks.append(head_block(GeoMean(d), []))
        sense = -1.0
    elif family == "power":
        alpha = rng.uniform(0.5, 2.0, d)
        blocks.append(head_block(PowerMean(alpha / alpha.sum()), []))
        sense = -1.0
    elif family == "gpower":
        alpha = rng.uniform(0.5, 2.0, d)
        cone = GenPower(alpha / alpha.sum(), 1)
        g = np.zeros((cone.dim, nvar))
        g[:d, 1:] = -np.eye(d)      # u block = x
        g[d, 0] = -1.0              # w block = t
        blocks.append((g, np.zeros(cone.dim), cone))
        sense = -1.0
    elif family == "log":
        blocks.append(head_block(LogPersp(d), [1.0]))
        sense = -1.0
    elif family == "sqr":
        blocks.append(head_block(SqrEpi(d), [1.0]))
        sense = 1.0                 # epigraph: minimize t
    else:
        raise ValueError(f"unknown maxvolume family {family!r}")

    # upper bounds ub - x >= 0
    g_ub = np.zeros((d, nvar))
    g_ub[:, 1:] = np.eye(d)
    blocks.append((g_ub, ub.copy(), Nonneg(d)))
    if family in ("geom", "power", "gpower"):
        radius = 1.25 * float(np.linalg.norm(ub / 2.0))
        g_l2 = np.zeros((1 + d, nvar))
        g_l2[1:, 1:] = -np.eye(d)
        h_l2 = np.concatenate([[radius], np.zeros(d)])
        blocks.append((g_l2, h_l2, L2Epi(d)))

    G = np.vstack([blk[0] for blk in blocks])
    h = np.concatenate([blk[1] for blk in blocks])
    c = np.zeros(nvar)
    c[0] = sense
    if family == "sqr":
        c[1:] = -0.1
    return build_model(c, np.zeros((0, nvar)), np.zeros(0),
                       G, h, [blk[2] for blk in blocks])


def _random_sym(rng, side, scale=1.0):
    m = rng.standard_normal((side, side))
    return scale * (m + m.T) / 2.0


def gen_lmi_condnum(s: InstanceSpec) -> ConicModel:
    """Minimize t such that I <= A0 + sum x_i A_i <= t I (eigenvalue spread).

    With ``psd=1`` the lower matrix inequality is written as an explicit
    PSD-vectorized block instead of a linear-matrix-inequality block.
    """
    rng = np.random.default_rng(s.seed)
    side = int(s.param("side", 4))
    k = int(s.param("k", 3))
    use_psd = bool(s.param("psd", 0))
    q_basis = np.linalg.qr(rng.standard_normal((side, side)))[0]
    eigs = rng.uniform(2.0, 6.0, side)
    a0 = q_basis @ (eigs[:, None] * q_basis.T)
    a0 = (a0 + a0.T) / 2.0
    mats = [_random_sym(rng, side, 0.5 / k) for _ in range(k)]
    nvar = k + 1                                  # (x, t)
    blocks = []
    low = a0 - np.eye(side)
    if use_psd:
        # svec(low + sum x_i mats_i) in the PSD cone
        cone = PsdSvec(side)
        g = np.zeros((cone.dim, nvar))
        for i, m in enumerate(mats):
            g[:, i] = -svec(m)
        blocks.append((g, svec(low), cone))
    else:
        cone = Lmi([low] + mats)
        g = np.zeros((cone.dim, nvar))
        g[0, :] = 0.0
        g[1:, :k] = -np.eye(k)
        h = np.zeros(cone.dim)
        h[0] = 1.0
        blocks.append((g, h, cone))
    # upper: t I - A(x) is PSD
    cone_up = Lmi([np.eye(side), -a0] + [-m for m in mats])
    g = np.zeros((cone_up.dim, nvar))
    g[0, k] = -1.0
    g[2:, :k] = -np.eye(k)
    h = np.zeros(cone_up.dim)
    h[1] = 1.0
    blocks.append((g, h, cone_up))
    G = np.vstack([blk[0] for blk in blocks])
    h = np.concatenate([blk[1] for blk in blocks])
    c = np.zeros(nvar)
    c[k] = 1.0
    return build_model(c, np.zeros((0, nvar)), np.zeros(0),
                       G, h, [blk[2] for blk in blocks])


def _chebyshev_bases(deg: int):
    npts = 2 * deg + 1
    pts = np.cos(np.pi * (np.arange(npts) + 0.5) / npts)
    v = np.polynomial.chebyshev.chebvander(pts, deg)
    w = np.sqrt(1.0 - pts**2)[:, None] * np.polynomial.chebyshev.chebvander(pts, deg - 1)
    return pts, v, w


def gen_wsos_polymin(s: InstanceSpec) -> ConicModel:
    """Polynomial minimization over [-1, 1] through sums-of-squares duality.

    ``moment=1`` instead builds a random feasible instance over the moment
    side of the cone (the barrier's natural side).
    """
    rng = np.random.default_rng(s.seed)
    deg = int(s.param("deg", 4))
    moment = bool(s.param("moment", 0))
    pts, v, w = _chebyshev_bases(deg)
    cone_args = [v, w]
    if moment:
        return _feasible_completion(rng, [WsosDualScalar(cone_args)], 4)
    coeffs = rng.standard_normal(2 * deg + 1)
    pvals = np.polynomial.chebyshev.chebval(pts, coeffs)
    # maximize t with  p - t  a weighted sum of squares on [-1, 1]
    cone = WsosDualScalar(cone_args, use_dual=True)
    G = np.ones((cone.dim, 1))
    return build_model(np.array([-1.0]), np.zeros((0, 1)), np.zeros(0),
                       G, pvals, [cone])


GENERATORS = {
    "lp_random": gen_lp_random,
    "lp_infeasible": gen_lp_infeasible,
    "portfolio": gen_portfolio,
    "maxvolume": gen_maxvolume,
    "lmi_condnum": gen_lmi_condnum,
    "wsos_polymin": gen_wsos_polymin,
}


def generate(s: InstanceSpec) -> ConicModel:
    """Build the model described by a spec (deterministic in the spec)."""
    try:
        fn = GENERATORS[s.generator]
    except KeyError:
        raise ValueError(f"unknown generator {s.generator!r}") from None
    return fn(s)


def known_objective(s: InstanceSpec) -> float | None:
    """Independently computed optimum where one is cheaply available."""
    if s.generator == "lp_random":
        return _lp_bruteforce(generate(s))
    if s.generator == "wsos_polymin" and not s.param("moment", 0):
        rng = np.random.default_rng(s.seed)
        deg = int(s.param("deg", 4))
        coeffs = rng.standard_normal(2 * deg + 1)
        grid = np.cos(np.linspace(0.0, np.pi, 20001))
        # objective is -t at the polynomial's minimum over [-1, 1]
        return -float(np.min(np.polynomial.chebyshev.chebval(grid, coeffs)))
    return None


def _lp_bruteforce(model: ConicModel) -> float | None:
    """Exact LP optimum by enumerating basic solutions (tiny sizes only)."""
    n, p, q = model.n, model.p, model.q
    if n > 12 or p + q > 40:
        return None
    rows = np.vstack([model.A, model.G])
    rhs = np.concatenate([model.b, model.h])
    best = None
    free = n - p
    if free < 0:
        return None
    for combo in itertools.combinations(range(q), free):
        idx = list(range(p)) + [p + j for j in combo]
        sq = rows[idx]
        if np.linalg.matrix_rank(sq) < n:
            continue
        x = np.linalg.lstsq(sq, rhs[idx], rcond=None)[0]
        if np.max(np.abs(sq @ x - rhs[idx])) > 1e-9:
            continue
        slack = model.h - model.G @ x
        eq = model.A @ x - model.b
        if np.all(slack >= -1e-9) and (p == 0 or np.max(np.abs(eq)) < 1e-9):
            val = float(model.c @ x)
            best = val if best is None else min(best, val)
    return best


# ---------------------------------------------------------------------------
# Metrics


def shifted_geomean(values, shift: float) -> float:
    """M(v, s) = prod (v_i + s)^(1/d) - s."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan")
    if np.any(v + shift <= 0.0):
        raise ValueError("shifted geometric mean needs positive shifted values")
    return float(np.exp(np.mean(np.log(v + shift))) - shift)


def perf_profile(values_by_mode: dict[str, list[float]]) -> dict[str, list[tuple[float, float]]]:
    """Performance-profile coordinates (x = log2 ratio, y = fraction <=).

    Each mode's per-instance value is divided by the best value for that
    instance across the supplied modes.
    """
    modes = list(values_by_mode)
    cols = np.array([values_by_mode[m] for m in modes], dtype=float)
    if cols.size == 0:
        return {m: [] for m in modes}
    best = np.min(cols, axis=0)
    out = {}
    for i, m in enumerate(modes):
        ratios = np.sort(np.log2(cols[i] / best))
        n = len(ratios)
        pts = []
        for j, x in enumerate(ratios):
            y = float(j + 1) / n
            if pts and pts[-1][0] == x:
                pts[-1] = (float(x), y)
            else:
                pts.append((float(x), y))
        out[m] = pts
    return out


# ---------------------------------------------------------------------------
# Suite runner


@dataclass
class RunRecord:
    instance: str
    mode: str
    status: str
    iters: int
    solve_ms: float
    init_ms: float
    lhs_ms: float
    rhs_ms: float
    direc_ms: float
    search_ms: float

    def row(self) -> list:
        return [getattr(self, f) for f in RUN_FIELDS]


@dataclass
class MetricsTable:
    runs: list[RunRecord] = field(default_factory=list)
    aggregates: list[dict] = field(default_factory=list)


def run_one(instance: InstanceSpec, mode: str,
            options: SolverOptions | None = None) -> RunRecord:
    """Run one (instance, mode) pair in a fresh solver."""
    base = options or SolverOptions()
    opts = SolverOptions(**{**base.__dict__, "stepper": mode})
    model = generate(instance)
    res = solve(model, opts)
    t = res.timings
    ms = lambda key: 1e3 * t.get(key, 0.0)
    return RunRecord(instance.name, mode, res.status, res.iterations,
                     1e3 * res.solve_seconds, ms("init"), ms("lhs"),
                     ms("rhs"), ms("direc"), ms("search"))


def _run_star(args):
    return run_one(*args)


def _aggregate(runs: list[RunRecord], modes: list[str]) -> list[dict]:
    instances = sorted({r.instance for r in runs})
    table = {(r.instance, r.mode): r for r in runs}
    ok = lambda r: r is not None and r.status in SUCCESS_STATUSES
    every = [i for i in instances if all(ok(table.get((i, m))) for m in modes)]
    out = []
    for mode in modes:
        conv = [i for i in instances if ok(table.get((i, mode)))]
        sets = {"every": every, "this": conv, "all": instances}
        for set_name, members in sets.items():
            iters, times = [], []
            for inst in members:
                rec = table.get((inst, mode))
                if ok(rec):
                    iters.append(rec.iters)
                    times.append(rec.solve_ms)
                else:
                    # substitute twice the worst converged value
                    peers = [table[(inst, m)] for m in modes
                             if ok(table.get((inst, m)))]
                    if not peers:
                        continue
                    iters.append(2.0 * max(p.iters for p in peers))
                    times.append(2.0 * max(p.solve_ms for p in peers))
            out.append({
                "mode": mode, "set": set_name, "conv": len(conv),
                "iters_sgm": shifted_geomean(iters, ITER_SHIFT),
                "time_sgm": shifted_geomean(times, TIME_SHIFT_MS),
            })
    return out


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_runs_csv(path: str, runs: list[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(RUN_FIELDS)
        for r in runs:
            out.writerow([_fmt(v) for v in r.row()])


def write_aggregates_csv(path: str, aggregates: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(AGG_FIELDS)
        for row in aggregates:
            out.writerow([_fmt(row[f]) for f in AGG_FIELDS])


def read_runs_csv(path: str) -> list[RunRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [RunRecord(r["instance"], r["mode"], r["status"], int(r["iters"]),
                      *[float(r[f]) for f in RUN_FIELDS[4:]]) for r in rows]


def run_suite(specs: list[InstanceSpec], modes: list[str] | None = None,
              options: SolverOptions | None = None, jobs: int = 1,
              out_dir: str | None = None) -> MetricsTable:
    """Run every (instance, mode) pair and aggregate the metrics.

    Individual failures become rows; they never abort the suite.  With
    ``jobs > 1`` the pairs run in a process pool (each worker owns its
    solver state; results are collected by this single caller).
    """
    modes = list(modes or MODES)
    pairs = [(sp, mode, options) for sp in specs for mode in modes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_star, pairs))
    else:
        runs = [_run_star(p) for p in pairs]
    table = MetricsTable(runs=runs, aggregates=_aggregate(runs, modes))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_runs_csv(os.path.join(out_dir, "runs.csv"), table.runs)
        write_aggregates_csv(os.path.join(out_dir, "aggregates.csv"), table.aggregates)
    return table


def default_suite() -> list[InstanceSpec]:
    """The stock suite: 22 instances touching every supported cone."""
    return [
        spec("lp_random", 7, n=8, p=2, q=12),
        spec("lp_random", 8, n=12, p=4, q=18),
        spec("lp_random", 9, n=20, p=6, q=30),
        spec("lp_infeasible", 1, n=4),
        spec("lp_infeasible", 2, n=8),
        spec("portfolio", 3, d=6),
        spec("portfolio", 4, d=10),
        spec("portfolio", 5, d=8, dual=1),
        spec("maxvolume", 11, d=5, family="geom"),
        spec("maxvolume", 12, d=8, family="geom"),
        spec("maxvolume", 13, d=5, family="power"),
        spec("maxvolume", 14, d=4, family="gpower"),
        spec("maxvolume", 15, d=6, family="gpower"),
        spec("maxvolume", 16, d=5, family="log"),
        spec("maxvolume", 17, d=6, family="sqr"),
        spec("lmi_condnum", 21, side=4, k=3),
        spec("lmi_condnum", 22, side=5, k=4),
        spec("lmi_condnum", 23, side=4, k=3, psd=1),
        spec("wsos_polymin", 31, deg=4),
        spec("wsos_polymin", 32, deg=6),
        spec("wsos_polymin", 33, deg=4, moment=1),
        spec("wsos_polymin", 34, deg=5, moment=1),
    ]
