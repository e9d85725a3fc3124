"""
Command-line interface.

Exit codes: 0 success, 1 malformed input or bad arguments, 2 numerical
failure (singular matrices, non-convergence).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .formats import (
    MatrixFileError,
    OutputFormat,
    format_solution,
    read_matrix,
    results_csv,
    results_json,
    results_markdown,
    solution_dict,
    write_matrix,
)
from .model import TABLE1_LOADINGS
from .rotation import RotationOptions, TargetSpec, build_icm_target, omt_rotate, ot_rotate
from .simulation import DEFAULT_REPS, PRESETS, preset_conditions, read_conditions_csv, run_study

logger = logging.getLogger("rotafactor")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

SEED_ENV = "ROTAFACTOR_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def cmd_rotate(args) -> int:
    loadings = read_matrix(args.loadings)
    if args.icm:
        if args.q is None:
            raise UsageError("--icm requires --q")
        if args.q != loadings.shape[1]:
            raise UsageError(f"--q {args.q} but {args.loadings} has {loadings.shape[1]} columns")
        target = build_icm_target(loadings.shape[0], args.q)
    else:
        target = TargetSpec(read_matrix(args.target))
        if target.shape != loadings.shape:
            raise UsageError(f"target shape {target.shape} does not match loadings shape {loadings.shape}")

    opts = RotationOptions(kappa_max=args.kappa_max, ridge_step=args.ridge_step, max_ridge_iters=args.max_ridge_iters)
    methods = ["ot", "omt"] if args.method == "both" else [args.method]
    solutions = {}
    for method in methods:
        solutions[method] = ot_rotate(loadings, target) if method == "ot" else omt_rotate(loadings, target, opts)

    fmt = OutputFormat(args.format)
    if fmt is OutputFormat.JSON:
        if len(solutions) == 1:
            payload = solution_dict(next(iter(solutions.values())))
        else:
            payload = {m: solution_dict(s) for m, s in solutions.items()}
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    else:
        sys.stdout.write("\n".join(format_solution(s, fmt) for s in solutions.values()))

    if args.save_pattern:
        out = Path(args.save_pattern)
        out.mkdir(parents=True, exist_ok=True)
        for method, sol in solutions.items():
            write_matrix(out / f"{method}_pattern.csv", sol.pattern, f"{method.upper()} pattern")
            write_matrix(out / f"{method}_phi.csv", sol.phi, f"{method.upper()} phi")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    if args.parallelism < 1:
        raise UsageError("--parallelism must be at least 1")
    seed = args.seed if args.seed is not None else _default_seed()
    conditions = preset_conditions(args.preset) if args.preset else read_conditions_csv(args.conditions)

    results = run_study(conditions, reps=args.reps, seed=seed, parallelism=args.parallelism)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(results))
    summary = out / "summary.md"
    summary.write_text(results_markdown(results, args.reps, seed))
    if OutputFormat(args.format) is OutputFormat.JSON:
        (out / "results.json").write_text(results_json(results))
    print(summary)
    return EXIT_OK


def _panel(initial: np.ndarray, ot, omt) -> str:
    q = initial.shape[1]
    heads = " ".join(f"{'F' + str(j + 1):>6}" for j in range(q))
    lines = [
        f"{'':5} {'initial orthogonal':^{7 * q}} | {'OT-rotated':^{7 * q}} | {'OMT-rotated':^{7 * q}}",
        f"{'':5} {heads} | {heads} | {heads}",
    ]

    def cell(v):
        # round first so tiny negatives do not print as -0.00
        return f"{round(float(v), 2) + 0.0:6.2f}"

    def row(values):
        return " ".join(cell(v) for v in values)

    for i in range(initial.shape[0]):
        lines.append(f"{'X' + str(i + 1):5} {row(initial[i])} | {row(ot.pattern[i])} | {row(omt.pattern[i])}")
    lines.append("factor inter-correlations")
    eye = np.eye(q)
    for j in range(q):
        def tri(m):
            return " ".join(cell(m[j, k]) if k <= j else " " * 6 for k in range(q))
        lines.append(f"{'F' + str(j + 1):5} {tri(eye)} | {tri(ot.phi)} | {tri(omt.phi)}")
    lines.append(
        f"congruence with target: OT {ot.congruence:.3f}, OMT {omt.congruence:.3f} "
        f"(kappa {omt.kappa:.3g}, ridge {omt.ridge_applied:.2f})"
    )
    return "\n".join(lines) + "\n"


def cmd_example(args) -> int:
    target = build_icm_target(*TABLE1_LOADINGS.shape)
    ot = ot_rotate(TABLE1_LOADINGS, target)
    omt = omt_rotate(TABLE1_LOADINGS, target)
    sys.stdout.write(_panel(TABLE1_LOADINGS, ot, omt))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rotafactor", description="Oblique mean-target and oblique target rotation.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    rot = sub.add_parser("rotate", help="rotate a loading matrix towards a target")
    rot.add_argument("loadings", help="CSV file of unrotated orthogonal loadings")
    tgt = rot.add_mutually_exclusive_group(required=True)
    tgt.add_argument("--target", help="CSV file of a 0/1 target matrix")
    tgt.add_argument("--icm", action="store_true", help="use a block target with equal-size consecutive blocks")
    rot.add_argument("--q", type=int, help="number of factors (required with --icm)")
    rot.add_argument("--method", choices=["omt", "ot", "both"], default="both")
    rot.add_argument("--kappa-max", type=float, default=20.0)
    rot.add_argument("--ridge-step", type=float, default=0.01)
    rot.add_argument("--max-ridge-iters", type=int, default=100)
    rot.add_argument("--format", choices=[f.value for f in OutputFormat], default="markdown")
    rot.add_argument("--save-pattern", metavar="DIR", help="also write full-precision pattern and phi CSVs to DIR")
    rot.set_defaults(func=cmd_rotate)

    sim = sub.add_parser("simulate", help="run the Monte-Carlo study")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--conditions", help="CSV with columns n,q,per_factor,level,rho")
    sim.add_argument("--reps", type=int, default=DEFAULT_REPS)
    sim.add_argument("--seed", type=int, default=None, help=f"study seed (default: ${SEED_ENV} or 0)")
    sim.add_argument("--parallelism", type=int, default=1)
    sim.add_argument("--out", default="results", help="output directory")
    sim.add_argument("--format", choices=[f.value for f in OutputFormat], default="csv",
                     help="json additionally writes results.json")
    sim.set_defaults(func=cmd_simulate)

    ex = sub.add_parser("example", help="reproduce the built-in 18 x 3 population example")
    ex.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"rotafactor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, MatrixFileError, ValueError, OSError) as exc:
        print(f"rotafactor: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
