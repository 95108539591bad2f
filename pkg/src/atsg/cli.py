"""Command-line driver.

    atsg build    --manual M.yaml --catalog C.toml [--dot F] [--plan F] [--report F]
    atsg validate --manual M.yaml --catalog C.toml
    atsg schedule --manual M.yaml --catalog C.toml [--arms N]
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path

from .builder import BuildError
from .catalog import CatalogError, load_catalog_file
from .core import GraphError, HandPolicy, validate
from .emit import dumps, emit_dot, emit_plan, emit_report
from .ingest import ManualError, load_manual_file, mask_series
from .pipeline import compile_manual
from .recovery import RecoveryError
from .scheduler import minimize_tool_changes, schedule_dual_arm

log = logging.getLogger("atsg")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atsg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manual", required=True, type=Path, help="detection file (YAML/JSON)")
    common.add_argument("--catalog", required=True, type=Path, help="catalog file (TOML)")
    common.add_argument(
        "--hand-policy",
        choices=[p.value for p in HandPolicy],
        default=HandPolicy.PER_INPUT.value,
    )
    common.add_argument("--arms", type=int, default=2)
    common.add_argument("--dedicated-tool-arm", action="store_true",
                        help="pin each tool to one arm")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for --mask-rate detection dropping")
    common.add_argument("--mask-rate", type=float, default=0.0,
                        help="drop each detection with this probability before building")

    build = sub.add_parser("build", parents=[common], help="compile a manual into an ATSG")
    build.add_argument("--dot", type=Path)
    build.add_argument("--plan", type=Path)
    build.add_argument("--report", type=Path)
    build.add_argument("--figures", type=Path,
                       help="directory for CSV tables and PNG charts")

    sub.add_parser("validate", parents=[common], help="build and check graph invariants")

    sched = sub.add_parser("schedule", parents=[common], help="print the execution plan")
    sched.add_argument("--plan", type=Path)
    return parser


def _compile(args):
    catalog = load_catalog_file(args.catalog)
    series = load_manual_file(args.manual)
    if args.mask_rate > 0:
        series = mask_series(series, args.mask_rate, random.Random(args.seed))
    result = compile_manual(series, catalog, HandPolicy(args.hand_policy))
    schedule = schedule_dual_arm(result.atsg, args.arms, args.dedicated_tool_arm)
    return result, schedule


def run(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.arms < 1:
        parser.error("--arms must be at least 1")
    try:
        result, schedule = _compile(args)
    except (OSError, CatalogError, ManualError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BuildError, RecoveryError, GraphError) as exc:
        print(f"error: build failed: {exc}", file=sys.stderr)
        return 1

    violations = validate(result.atsg)
    if args.command == "validate":
        for v in violations:
            print(v)
        print(f"{len(result.atsg.units)} units, {len(violations)} violations")
        return 0 if not violations else 1

    plan = emit_plan(result.atsg, schedule)
    if args.command == "schedule":
        text = dumps(plan)
        if args.plan:
            args.plan.write_text(text, encoding="utf-8")
        else:
            for s in plan["steps"]:
                print(f"{s['slot']:>3} arm{s['arm']} {s['verb']:<7} "
                      f"{s['parent']['part']:<12} <- {s['attached']['part']:<14} [{s['tool']}]")
            print(f"makespan {plan['makespan']}, tool changes {plan['tool_changes']}")
        return 0

    report = emit_report(result, schedule, minimize_tool_changes(result.atsg))
    if args.dot:
        args.dot.write_text(emit_dot(result.atsg, result.catalog.name or "ATSG"), encoding="utf-8")
    if args.plan:
        args.plan.write_text(dumps(plan), encoding="utf-8")
    if args.report:
        args.report.write_text(dumps(report), encoding="utf-8")
    if args.figures:
        from .figures import write_bundle

        write_bundle(report, plan, args.figures)
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return 1
    print(
        f"{len(result.atsg.units)} units, makespan {schedule.makespan} on {schedule.arms} arm(s), "
        f"converged={result.log.converged}"
    )
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
