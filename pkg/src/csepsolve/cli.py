"""Command-line interface.

Exit codes: 0 when a solve stops by tolerance, 1 on the outer-iteration
cap, 2 for validation errors (bad files, bad parameters), 3 for runtime
failures inside a run.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .errors import (
    ConstantsMissing,
    DimensionMismatch,
    EmptyF,
    OracleUnavailable,
    ParameterViolation,
    ParseError,
    SchemaError,
    SolverError,
)
from .harness import ALGORITHMS, RunSpec, compare, load_problem, reference_solution, run
from .outcome import STOP_MAX_OUTER, STOP_TOLERANCE
from .problems import validate

EXIT_OK = 0
EXIT_MAX_OUTER = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

_VALIDATION_ERRORS = (
    ParameterViolation,
    ParseError,
    SchemaError,
    ConstantsMissing,
    DimensionMismatch,
    ValueError,
)


def _add_solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="prox step size (default: derived from the constants)")
    p.add_argument("--k", type=float, default=None,
                   help="cut-inflation constant (default: derived)")
    p.add_argument("--eta", type=float, default=0.5,
                   help="linesearch backtracking ratio (armijo only)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-outer", type=int, default=100_000)
    p.add_argument("--rule", choices=("strict", "relaxed"), default="strict")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--certify", type=int, default=0, metavar="PROBES",
                   help="probes per inner solve for optimality certificates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csepsolve",
        description="Solvers for common solutions of equilibrium-problem systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one algorithm on a problem file")
    p_solve.add_argument("problem")
    p_solve.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    _add_solver_options(p_solve)
    p_solve.add_argument("--trace", dest="trace_path", default=None)
    p_solve.add_argument("--summary", dest="summary_path", default=None)

    p_oracle = sub.add_parser("oracle", help="print the reference projection of x0")
    p_oracle.add_argument("problem")

    p_cmp = sub.add_parser("compare", help="run several algorithms on one problem")
    p_cmp.add_argument("problem")
    p_cmp.add_argument("--algorithms", required=True,
                       help="comma-separated subset of " + ",".join(ALGORITHMS))
    _add_solver_options(p_cmp)
    p_cmp.add_argument("--output", default=None, help="write the table as JSON")

    p_val = sub.add_parser("validate", help="spot-check the standing assumptions")
    p_val.add_argument("problem")
    p_val.add_argument("--samples", type=int, default=200)
    p_val.add_argument("--seed", type=int, default=0)

    return parser


def _spec_from_args(args, algorithm: str) -> RunSpec:
    return RunSpec(
        problem_path=args.problem,
        algorithm=algorithm,
        lam=args.lam,
        k=args.k,
        eta=args.eta,
        tol=args.tol,
        max_outer=args.max_outer,
        rule=args.rule,
        seed=args.seed,
        workers=args.workers,
        certify_probes=args.certify,
        trace_path=getattr(args, "trace_path", None),
        summary_path=getattr(args, "summary_path", None),
    )


def _cmd_solve(args) -> int:
    outcome = run(_spec_from_args(args, args.algorithm))
    final = ", ".join(f"{v:.10g}" for v in outcome.final_x)
    print(f"algorithm: {outcome.algorithm}")
    print(f"stop_reason: {outcome.stop_reason}")
    print(f"iterations: {outcome.iterations}")
    print(f"final_x: [{final}]")
    if outcome.trace and not math.isnan(outcome.trace[-1].dist_to_known):
        print(f"dist_to_oracle: {outcome.trace[-1].dist_to_known:.6e}")
    print(f"invariant_violations: {sum(outcome.invariant_violations.values())}")
    if outcome.error:
        print(f"error: {outcome.error}", file=sys.stderr)
        return EXIT_RUNTIME
    if outcome.stop_reason == STOP_TOLERANCE:
        return EXIT_OK
    if outcome.stop_reason == STOP_MAX_OUTER:
        return EXIT_MAX_OUTER
    return EXIT_RUNTIME


def _cmd_oracle(args) -> int:
    instance = load_problem(args.problem)
    try:
        point = reference_solution(instance)
    except (OracleUnavailable, EmptyF) as exc:
        print(f"oracle unavailable: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"reference": [float(v) for v in point]}))
    return EXIT_OK


def _cmd_compare(args) -> int:
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    specs = [_spec_from_args(args, a) for a in algorithms]
    report = compare(specs)
    print(report.to_text())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    bad = [r for r in report.rows if r.stop_reason not in (STOP_TOLERANCE, STOP_MAX_OUTER)]
    return EXIT_RUNTIME if bad else EXIT_OK


def _cmd_validate(args) -> int:
    instance = load_problem(args.problem)
    report = validate(instance, samples=args.samples, seed=args.seed)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "oracle": _cmd_oracle,
        "compare": _cmd_compare,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
