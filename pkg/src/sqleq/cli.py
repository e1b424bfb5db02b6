"""Command-line front door.

    sqleq run DATASET SCHEMADIR [--out DIR] [flags]
    sqleq check SCHEMA GOLD_SQL GEN_SQL [flags]
    sqleq replay SCHEMA DUMP GOLD_SQL GEN_SQL

``run`` drives a whole benchmark and exits 0 (all conclusive), 1 (some
pairs Inconclusive), or 2 (ingest failure). ``check`` verifies one pair
and prints the verdict; ``replay`` re-executes a counterexample dump.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dumps import MalformedDump, dump_db
from .harness import HarnessConfig, IngestError, replay, run_eval
from .parser import ParseError, parse_sql
from .pipeline import (
    Backend,
    EquivalentUpTo,
    Inconclusive,
    NotEquivalent,
    TaskConfig,
    eqcheck,
)
from .schema import make_schema
from .solver import SolveBudget


def _add_task_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bound", type=int, default=5, metavar="K",
                   help="maximum rows per table to search (default 5)")
    p.add_argument("--timeout-secs", type=float, default=600.0, metavar="S",
                   help="solver budget per pair (default 600)")
    p.add_argument("--exclude-degenerate", action=argparse.BooleanOptionalAction,
                   default=True,
                   help="ignore witnesses where one side is empty and the "
                        "other all-NULL (default on)")
    p.add_argument("--validation-backend", choices=["reference", "sqlite"],
                   default="reference",
                   help="how counterexamples are re-executed (default reference)")


def _task_config(args: argparse.Namespace) -> TaskConfig:
    return TaskConfig(
        max_bound=args.bound,
        budget=SolveBudget(cpu_seconds=args.timeout_secs),
        exclude_degenerate=args.exclude_degenerate,
        validation_backend=Backend(args.validation_backend),
    )


def _load_schema(path: str):
    return make_schema(json.loads(Path(path).read_text(encoding="utf-8")))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = HarnessConfig(
        task=_task_config(args),
        parallelism=args.parallelism,
        cross_check=args.cross_check,
        verify_only_ex_passes=args.verify_only_ex_passes,
        emit_smtlib=args.emit_smtlib,
        out_dir=args.out,
    )
    try:
        report = run_eval(args.dataset, args.schemas, cfg)
    except IngestError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2
    print((Path(args.out) / "reports" / "report.txt").read_text(encoding="utf-8"), end="")
    return report.exit_code()


def _cmd_check(args: argparse.Namespace) -> int:
    schema = _load_schema(args.schema)
    try:
        gold = parse_sql(args.gold, schema)
        gen = parse_sql(args.generated, schema)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    r = eqcheck(schema, gold, gen, _task_config(args))
    v = r.verdict
    if isinstance(v, NotEquivalent):
        print(f"NotEquivalent at bound {v.found_at_bound} (validated)")
        print(dump_db(v.db), end="")
        return 0
    if isinstance(v, EquivalentUpTo):
        print(f"EquivalentUpTo({v.k_max})")
        return 0
    assert isinstance(v, Inconclusive)
    detail = f": {v.detail}" if v.detail else ""
    print(f"Inconclusive({v.reason.value}){detail}")
    return 1


def _cmd_replay(args: argparse.Namespace) -> int:
    schema = _load_schema(args.schema)
    try:
        replay(args.dump, args.gold, args.generated, schema)
    except (MalformedDump, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    top = argparse.ArgumentParser(prog="sqleq")
    sub = top.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate a benchmark file")
    p_run.add_argument("dataset", help="line-delimited JSON benchmark entries")
    p_run.add_argument("schemas", help="directory with <db_id>.json schemas")
    p_run.add_argument("--out", default="eval-out", help="artifact directory")
    p_run.add_argument("--parallelism", type=int, default=1, metavar="N")
    p_run.add_argument("--cross-check", action=argparse.BooleanOptionalAction,
                       default=True,
                       help="reuse counterexamples across methods (default on)")
    p_run.add_argument("--verify-only-ex-passes", action=argparse.BooleanOptionalAction,
                       default=True,
                       help="skip verification for pairs already failing EX "
                            "(default on)")
    p_run.add_argument("--emit-smtlib", action="store_true",
                       help="write each pair's solver problem next to its dump")
    _add_task_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_check = sub.add_parser("check", help="verify one gold/generated pair")
    p_check.add_argument("schema", help="schema JSON file")
    p_check.add_argument("gold", help="gold SQL text")
    p_check.add_argument("generated", help="generated SQL text")
    _add_task_flags(p_check)
    p_check.set_defaults(fn=_cmd_check)

    p_replay = sub.add_parser("replay", help="re-execute a counterexample dump")
    p_replay.add_argument("schema", help="schema JSON file")
    p_replay.add_argument("dump", help="dump.json file")
    p_replay.add_argument("gold", help="gold SQL text")
    p_replay.add_argument("generated", help="generated SQL text")
    p_replay.set_defaults(fn=_cmd_replay)

    args = top.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
