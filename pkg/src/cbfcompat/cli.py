"""``cbf-compat`` command line.

    cbf-compat verify PROBLEM.json [--r0 R] [--lambda L] [--r-min R] [--boundary-margin A]
                                   [--lipschitz auto|per-cube|user:LA,LB] [--rho-cap]
                                   [--threads T] [--max-iter K]
                                   [--out REPORT.json] [--trace CUBES.csv] [--svg FIG.svg]
                                   [--reproducible] [-v]

Flags take precedence over the ``options`` block of the problem file, which
in turn overrides the built-in defaults.

Exit codes: 0 compatible, 1 incompatible, 2 inconclusive, 3 usage or
problem-file error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checker import NonTerminationError, check
from .expr import EvaluationError
from .geometry import GeometryError
from .lipschitz import LipschitzError
from .lp import LPNumericalError
from .options import LipschitzMode
from .problem import ProblemError, load_problem
from .report import Report, tool_version
from .svg import render_svg

__all__ = ["run", "main", "EXIT_CODES"]

EXIT_CODES = {"compatible": 0, "incompatible": 1, "inconclusive": 2}
EXIT_USAGE = 3
EXIT_RUNTIME = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _lipschitz(text):
    try:
        return LipschitzMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbf-compat", description="Offline compatibility verification of multiple control barrier functions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    v = sub.add_parser("verify", help="check a problem file", description="Run the sample-and-refine check on a problem file.")
    v.add_argument("problem", type=Path, help="JSON problem file")
    v.add_argument("--r0", type=float, help="initial lattice size")
    v.add_argument("--lambda", dest="lam", type=float, help="refinement factor in (0, 1)")
    v.add_argument("--r-min", type=float, help="stop with an inconclusive verdict once the lattice size reaches this")
    v.add_argument("--boundary-margin", type=float, help="skip cubes on which every h_i >= A")
    v.add_argument("--lipschitz", type=_lipschitz, help="auto, per-cube or user:LA,LB")
    v.add_argument("--rho-cap", action="store_true", default=None, help="refine at min(rho, lambda r)")
    v.add_argument("--threads", type=_positive_int, help="worker processes for the LP solves")
    v.add_argument("--max-iter", type=_positive_int, help="iteration cap")
    v.add_argument("--out", type=Path, help="write the JSON report here")
    v.add_argument("--trace", type=Path, help="write the per-cube CSV trace here")
    v.add_argument("--svg", type=Path, help="write an SVG figure here (2-D problems only)")
    v.add_argument("--reproducible", action="store_true", help="omit wall time from the report")
    v.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return parser


def _summary(spec, verdict) -> str:
    lines = [f"problem: {spec.name or '<unnamed>'}  (n = {spec.n}, m = {spec.m}, N = {spec.N})"]
    L = verdict.lipschitz
    lines.append(f"Lipschitz constants: L_A = {L.L_A:.6g}, L_b = {L.L_b:.6g} ({L.mode}{', not validated' if L.mode == 'user' else ''})")
    lines.append("iter  cube size    total  certified  refined  incompatible")
    for s in verdict.iterations:
        lines.append(
            f"{s.iteration:>4}  {s.cube_size:<9.6g} {s.cubes_total:>8} {s.cubes_certified:>10} {s.cubes_refined:>8} {s.cubes_incompatible:>13}"
        )
    if verdict.status == "compatible":
        lines.append("verdict: COMPATIBLE")
    elif verdict.status == "incompatible":
        w = ", ".join(f"{v:.6g}" for v in verdict.witness)
        h = ", ".join(f"{v:.6g}" for v in verdict.h_values)
        lines.append(f"verdict: INCOMPATIBLE at x = ({w}), c = {verdict.c:.6g}, h = ({h})")
    else:
        lines.append(f"verdict: INCONCLUSIVE, not robustly compatible with robustness level above eta' = {verdict.eta_prime:.6g}")
    lines.append(f"wall time: {verdict.wall_time:.2f} s")
    return "\n".join(lines)


def run(argv=None) -> int:
    """Entry point returning the exit code instead of exiting."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"cbf-compat: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")

    try:
        spec = load_problem(args.problem)
        options = spec.options.with_overrides(
            r0=args.r0,
            lam=args.lam,
            r_min=args.r_min,
            boundary_margin_a=args.boundary_margin,
            lipschitz=args.lipschitz,
            rho_capped_refinement=args.rho_cap,
            thread_count=args.threads,
            max_iterations=args.max_iter,
        )
        if args.svg is not None and spec.n != 2:
            raise ProblemError(f"--svg needs a 2-D problem, got state_dim = {spec.n}")
    except FileNotFoundError:
        print(f"cbf-compat: problem file not found: {args.problem}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemError, ValueError, OSError) as exc:
        print(f"cbf-compat: problem error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        verdict = check(spec, options, record_trace=args.trace is not None or args.svg is not None)
    except EvaluationError as exc:
        return _runtime("evaluation", exc)
    except LipschitzError as exc:
        return _runtime("lipschitz", exc)
    except LPNumericalError as exc:
        return _runtime("lp", exc)
    except GeometryError as exc:
        return _runtime("geometry", exc)
    except NonTerminationError as exc:
        return _runtime("checker", exc)

    print(_summary(spec, verdict))
    try:
        if args.out is not None:
            report = Report.build(spec, options, verdict, include_timing=not args.reproducible)
            args.out.write_text(report.dumps(), encoding="utf-8")
        if args.trace is not None:
            with open(args.trace, "w", encoding="utf-8", newline="") as fh:
                verdict.trace.write_csv(fh)
        if args.svg is not None:
            args.svg.write_text(render_svg(verdict.trace, spec, verdict.bounding_box), encoding="utf-8")
    except OSError as exc:
        return _runtime("output", exc)
    return EXIT_CODES[verdict.status]


def _runtime(component: str, exc: Exception) -> int:
    print(f"cbf-compat: {component} error: {exc}", file=sys.stderr)
    return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
