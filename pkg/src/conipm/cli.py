"""Command-line front end: solve stored models, generate instances, run the
benchmark suite, and emit performance profiles."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import bench
from .errors import ConipmError
from .model import (DUAL_INFEASIBLE, OPTIMAL, PRIMAL_INFEASIBLE,
                    deserialize_model, serialize_model)
from .solver import SolverOptions, solve
from .stepper import MODES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2

_SUCCESS = {OPTIMAL, PRIMAL_INFEASIBLE, DUAL_INFEASIBLE}


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; we promise 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="conipm", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_solve = sub.add_parser("solve", help="solve a stored model file")
    p_solve.add_argument("--model", required=True, help="path to a model text file")
    p_solve.add_argument("--stepper", choices=MODES, default="comb")
    p_solve.add_argument("--tol-feas", type=float, default=None)
    p_solve.add_argument("--tol-gap", type=float, default=None)
    p_solve.add_argument("--tol-inf", type=float, default=None)
    p_solve.add_argument("--tol-illposed", type=float, default=None)
    p_solve.add_argument("--max-iters", type=int, default=None)
    p_solve.add_argument("--out", default=None,
                         help="optional CSV path for the iteration trace")

    p_gen = sub.add_parser("gen", help="generate an instance to a model file")
    p_gen.add_argument("--spec", required=True, choices=sorted(bench.GENERATORS),
                       help="generator name")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--param", action="append", default=[],
                       metavar="KEY=VALUE", help="generator parameter (repeatable)")

    p_bench = sub.add_parser("bench", help="run the benchmark suite")
    p_bench.add_argument("--suite", default="default", choices=["default"])
    p_bench.add_argument("--out", required=True, help="output directory for CSVs")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--modes", default=",".join(MODES),
                         help="comma-separated stepping modes")

    p_prof = sub.add_parser("profile", help="emit performance-profile coordinates")
    p_prof.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding a bench runs.csv")
    p_prof.add_argument("--pair", required=True, metavar="MODEA,MODEB")
    p_prof.add_argument("--out", required=True, help="CSV path for the coordinates")
    p_prof.add_argument("--metric", choices=["iters", "solve_ms"], default="iters")
    p_prof.add_argument("--plot", default=None, metavar="FIG",
                        help="optionally render the curves to an image file")
    return parser


def _options_from(args) -> SolverOptions:
    opts = SolverOptions(stepper=args.stepper)
    if args.tol_feas is not None:
        opts.eps_feas = opts.eps_rel = args.tol_feas
    if args.tol_gap is not None:
        opts.eps_abs = args.tol_gap
    if args.tol_inf is not None:
        opts.eps_inf = args.tol_inf
    if args.tol_illposed is not None:
        opts.eps_path = args.tol_illposed
    if args.max_iters is not None:
        opts.max_iters = args.max_iters
    return opts


def _print_header(opts: SolverOptions) -> None:
    print(f"conipm solve: stepper={opts.stepper} "
          f"eps_feas={opts.eps_feas:.3e} eps_rel={opts.eps_rel:.3e} "
          f"eps_inf={opts.eps_inf:.3e} eps_abs={opts.eps_abs:.3e} "
          f"eps_path={opts.eps_path:.3e}")


def _cmd_solve(args) -> int:
    with open(args.model) as fh:
        model = deserialize_model(fh.read())
    opts = _options_from(args)
    _print_header(opts)
    result = solve(model, opts)
    print(f"status: {result.status}")
    if result.primal_objective is not None:
        print(f"objective: {result.primal_objective:.12g} "
              f"(dual {result.dual_objective:.12g})")
    print(f"iterations: {result.iterations}  "
          f"time: {1e3 * result.solve_seconds:.2f} ms")
    if result.detail:
        print(f"detail: {result.detail}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["index", "mu", "tau", "kappa", "kind", "alpha",
                          "prox", "worst_residual"])
            for t in result.trace:
                out.writerow([t.index, f"{t.mu:.17g}", f"{t.tau:.17g}",
                              f"{t.kappa:.17g}", t.kind, f"{t.alpha:.17g}",
                              f"{t.prox:.17g}", f"{t.worst_residual:.17g}"])
    return EXIT_OK if result.status in _SUCCESS else EXIT_FAILED


def _parse_params(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConipmError(f"--param expects KEY=VALUE, got {item!r}")
        key, _, val = item.partition("=")
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                out[key] = val
    return out


def _cmd_gen(args) -> int:
    instance = bench.spec(args.spec, args.seed, **_parse_params(args.param))
    model = bench.generate(instance)
    with open(args.out, "w") as fh:
        fh.write(serialize_model(model))
    print(f"wrote {instance.name} -> {args.out} "
          f"(n={model.n} p={model.p} q={model.q})")
    return EXIT_OK


def _cmd_bench(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise ConipmError(f"unknown stepping mode(s): {', '.join(bad)}")
    table = bench.run_suite(bench.default_suite(), modes=modes,
                            jobs=args.jobs, out_dir=args.out)
    n_fail = sum(r.status not in _SUCCESS for r in table.runs)
    print(f"ran {len(table.runs)} (instance, mode) pairs; {n_fail} failures")
    print(f"wrote {args.out}/runs.csv and {args.out}/aggregates.csv")
    for row in table.aggregates:
        if row["set"] == "every":
            print(f"  {row['mode']:6s} conv={row['conv']:3d} "
                  f"iters_sgm={row['iters_sgm']:8.3f} "
                  f"time_sgm={row['time_sgm']:10.3f} ms")
    return EXIT_OK


def _cmd_profile(args) -> int:
    pair = [m.strip() for m in args.pair.split(",")]
    if len(pair) != 2 or any(m not in MODES for m in pair):
        raise ConipmError(f"--pair expects two stepping modes, got {args.pair!r}")
    runs = bench.read_runs_csv(f"{args.in_dir}/runs.csv")
    by_mode = {}
    for mode in pair:
        rows = {r.instance: r for r in runs if r.mode == mode
                and r.status in _SUCCESS}
        by_mode[mode] = rows
    shared = sorted(set(by_mode[pair[0]]) & set(by_mode[pair[1]]))
    if not shared:
        raise ConipmError("no instances converged under both modes")
    values = {m: [getattr(by_mode[m][i], args.metric) for i in shared]
              for m in pair}
    curves = bench.perf_profile(values)
    with open(args.out, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["mode", "x_log2_ratio", "y_fraction"])
        for mode in pair:
            for x, y in curves[mode]:
                out.writerow([mode, f"{x:.17g}", f"{y:.17g}"])
    print(f"wrote {args.out} ({len(shared)} instances, metric={args.metric})")
    if args.plot:
        _render_profile(curves, pair, args.metric, args.plot)
        print(f"wrote {args.plot}")
    return EXIT_OK


def _render_profile(curves, pair, metric, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for mode in pair:
        pts = curves[mode]
        xs = [0.0] + [x for x, _ in pts]
        ys = [0.0] + [y for _, y in pts]
        ax.step(xs, ys, where="post", label=mode)
    ax.set_xlabel("log2 performance ratio")
    ax.set_ylabel("fraction of instances")
    ax.set_title(f"performance profile ({metric})")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    handlers = {"solve": _cmd_solve, "gen": _cmd_gen,
                "bench": _cmd_bench, "profile": _cmd_profile}
    try:
        return handlers[args.verb](args)
    except FileNotFoundError as exc:
        print(f"conipm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConipmError as exc:
        print(f"conipm: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
