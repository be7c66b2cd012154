"""Command-line front end.

Usage::

    niqs example mach-zehnder-atom --out mz.json
    niqs analyze  --model mz.json
    niqs optimize --model mz.json --format text
    niqs construct --model mz.json
    niqs simulate --model mz.json --trials 100000 --seed 42

Exit codes: 0 success / feasible, 1 infeasible, 2 invalid input.
Set ``NIQS_THREADS`` to parallelise witness starts and simulation chunks.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import __version__, report
from .catalog import EXAMPLES
from .errors import NiqsError
from .modelfile import ModelFileError, dump_model, load
from .pipeline import (analyze, best_optimum, choose_alpha, optimize, plan_for, search_config,
                       simulate)
from .projector import optimality_audit, success_probability

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID = 0, 1, 2


def _emit(doc: dict, args) -> None:
    text = report.to_json(doc) if args.format == "json" else report.to_text(doc) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _analysis(args):
    spec = load(args.model)
    cfg = search_config(spec, seed=args.seed, starts=args.starts, tol_witness=args.tol_witness)
    return analyze(spec, cfg)


def _grid(args, an):
    n_abs = args.grid or an.spec.grid.get("n_abs", 201)
    return n_abs, an.spec.grid.get("n_phase", 64)


def cmd_analyze(args) -> int:
    an = _analysis(args)
    _emit(report.analysis_report(an), args)
    return EXIT_OK if an.verdict == "feasible" else EXIT_INFEASIBLE


def cmd_optimize(args) -> int:
    an = _analysis(args)
    opts = optimize(an, *_grid(args, an))
    best = best_optimum(opts) if opts else None
    _emit(report.optimization_report(an, opts, best), args)
    return EXIT_OK if best else EXIT_INFEASIBLE


def _alpha_arg(args):
    return None if args.alpha_sq is None else math.sqrt(args.alpha_sq)


def cmd_construct(args) -> int:
    an = _analysis(args)
    opts = optimize(an, *_grid(args, an))
    if not opts:
        _emit(report.analysis_report(an), args)
        return EXIT_INFEASIBLE
    best = best_optimum(opts)
    _, plan = plan_for(an, best.row, choose_alpha(an, best, _alpha_arg(args)))
    audit = optimality_audit(plan, best.row.witness, best.row.decomposition, args.audit, args.seed)
    _emit(report.construct_report(an, best.row, plan, success_probability(plan), audit), args)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise ModelFileError("--trials", None, "must be a positive integer")
    an = _analysis(args)
    opts = optimize(an, *_grid(args, an))
    if not opts:
        _emit(report.analysis_report(an), args)
        return EXIT_INFEASIBLE
    best = best_optimum(opts)
    alpha = choose_alpha(an, best, _alpha_arg(args))
    sim = simulate(an, best, alpha, args.trials, args.seed, an.spec.object_state)
    _emit(report.simulate_report(an, best.row, sim, args.trials, args.seed), args)
    return EXIT_OK


def cmd_example(args) -> int:
    if args.name not in EXAMPLES:
        print(f"niqs: unknown example {args.name!r}; choose from {', '.join(EXAMPLES)}", file=sys.stderr)
        return EXIT_INVALID
    text = dump_model(EXAMPLES[args.name]())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="JSON model file")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--tol-witness", type=float, default=None)
    common.add_argument("--starts", type=int, default=None, help="witness search starts")
    common.add_argument("--grid", type=int, default=None, help="number of |alpha| grid points")

    parser = argparse.ArgumentParser(prog="niqs", description="Nondistortion interrogation analysis")
    parser.add_argument("--version", action="version", version=f"niqs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="decide feasibility")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("optimize", parents=[common], help="optimal success probability per witness")
    p.set_defaults(func=cmd_optimize)
    p = sub.add_parser("construct", parents=[common], help="build the success projector")
    p.add_argument("--alpha-sq", type=float, default=None, help="|alpha|^2 (default: model or optimum)")
    p.add_argument("--audit", type=int, default=10_000, help="optimality audit samples")
    p.set_defaults(func=cmd_construct)
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo interrogation")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--alpha-sq", type=float, default=None)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("example", help="write a built-in model file")
    p.add_argument("name", help=", ".join(EXAMPLES))
    p.add_argument("--out")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if getattr(args, "alpha_sq", None) is not None and not 0 < args.alpha_sq < 1:
        print("niqs: --alpha-sq must lie in (0, 1)", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ModelFileError as exc:
        print(f"niqs: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NiqsError as exc:
        print(f"niqs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BrokenPipeError:
        # reader went away (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
