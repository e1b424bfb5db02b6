"""Batch evaluation over a benchmark file.

A dataset is line-delimited JSON: one entry per question with the gold SQL
and one prediction per method. Schemas live in a sibling directory keyed by
``db_id`` (``<db_id>.json``), optionally next to a static test database
(``<db_id>.static.sql``, an INSERT script) used for the EX metric.

Per entry and method the run parses both SQLs, computes EX when a static
database exists, runs the bounded equivalence check, pools counterexamples
across methods, and scores. Everything lands in an artifact directory:

    reports/report.txt        aligned accuracy/rank table
    reports/report.json       the same, machine-readable
    reports/verdicts.jsonl    one record per (question, method), sorted
    reports/stats.json        coverage and timing (wall-clock; the one
                              artifact exempt from byte-determinism)
    counterexamples/<question_id>/<method>/{dump.json, insert.sql}

A pair that fails to parse or hits an unsupported construct is recorded as
Inconclusive and never aborts the batch.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import qast as q
from .backends import reference_ex
from .dumps import MalformedDump, db_hash, dump_db, insert_script, load_db, load_insert_script
from .encoder import EncodeError, EncodeOpts, nonequivalence_formula
from .evaluator import ConcreteDb, EvalError, eval_query, ex_metric
from .features import feature_scan
from .parser import ParseError, parse_sql
from .pipeline import (
    Inconclusive,
    NotEquivalent,
    PairTask,
    Reason,
    ScoreReport,
    TaskConfig,
    TaskResult,
    Verdict,
    cross_check,
    run_tasks,
    score,
)
from .schema import DatabaseSchema, make_schema


class IngestError(Exception):
    """Bad dataset or schema files; fatal for the whole run."""


@dataclass(frozen=True)
class BenchmarkEntry:
    question_id: str
    db_id: str
    question_text: str
    gold_sql: str
    predictions: dict[str, str]


@dataclass
class HarnessConfig:
    task: TaskConfig = field(default_factory=TaskConfig)
    parallelism: int = 1
    cross_check: bool = True
    verify_only_ex_passes: bool = True
    emit_smtlib: bool = False
    out_dir: str = "eval-out"


@dataclass
class EvalRow:
    """One (question, method) cell of the report."""

    question_id: str
    method: str
    supported: bool
    unsupported_why: str
    ex: int | None  # None = no static database
    result: TaskResult | None  # None = verification skipped

    def verdict(self) -> Verdict | None:
        return self.result.verdict if self.result else None


@dataclass
class EvalReport:
    scores: ScoreReport
    rows: list[EvalRow]
    coverage: dict[str, float]  # method -> % supported pairs
    cex_rate: dict[str, float]  # method -> % pairs with a counterexample
    mean_cex_secs: dict[str, float]
    median_cex_secs: dict[str, float]
    n_questions: int

    def exit_code(self) -> int:
        for row in self.rows:
            if isinstance(row.verdict(), Inconclusive):
                return 1
        return 0


# ---------------------------------------------------------------------------
# Ingest


def load_dataset(path: str | Path) -> list[BenchmarkEntry]:
    entries = []
    seen = set()
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read dataset: {exc}") from exc
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"dataset line {i}: {exc}") from exc
        try:
            entry = BenchmarkEntry(
                question_id=str(obj["question_id"]),
                db_id=str(obj["db_id"]),
                question_text=str(obj.get("question_text", "")),
                gold_sql=str(obj["gold_sql"]),
                predictions={str(k): str(v) for k, v in obj["predictions"].items()},
            )
        except (KeyError, AttributeError, TypeError) as exc:
            raise IngestError(f"dataset line {i}: missing field {exc}") from exc
        if entry.question_id in seen:
            raise IngestError(f"duplicate question_id {entry.question_id!r}")
        seen.add(entry.question_id)
        entries.append(entry)
    return entries


def load_schema_dir(
    path: str | Path, db_ids: set[str]
) -> tuple[dict[str, DatabaseSchema], dict[str, ConcreteDb]]:
    root = Path(path)
    schemas: dict[str, DatabaseSchema] = {}
    static: dict[str, ConcreteDb] = {}
    for db_id in sorted(db_ids):
        f = root / f"{db_id}.json"
        try:
            schemas[db_id] = make_schema(json.loads(f.read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError) as exc:
            raise IngestError(f"schema {f}: {exc}") from exc
        sql = root / f"{db_id}.static.sql"
        if sql.exists():
            try:
                static[db_id] = load_insert_script(
                    sql.read_text(encoding="utf-8"), schemas[db_id]
                )
            except (MalformedDump, EvalError) as exc:
                raise IngestError(f"static db {sql}: {exc}") from exc
    return schemas, static


# ---------------------------------------------------------------------------
# The run


def _parse_pair(
    entry: BenchmarkEntry, method: str, schema: DatabaseSchema
) -> tuple[q.QueryAst | None, q.QueryAst | None, str]:
    why = []
    gold = gen = None
    try:
        gold = parse_sql(entry.gold_sql, schema)
    except ParseError as exc:
        why.append(f"gold: {exc}")
    try:
        gen = parse_sql(entry.predictions[method], schema)
    except ParseError as exc:
        why.append(f"prediction: {exc}")
    for node, side in ((gold, "gold"), (gen, "prediction")):
        if node is not None:
            report = feature_scan(node)
            if not report:
                why.append(f"{side}: " + "; ".join(report.reasons))
    return gold, gen, "; ".join(why)


def run_eval(
    dataset_path: str | Path, schemas_path: str | Path, cfg: HarnessConfig
) -> EvalReport:
    entries = load_dataset(dataset_path)
    schemas, static = load_schema_dir(schemas_path, {e.db_id for e in entries})

    rows: list[EvalRow] = []
    tasks: list[PairTask] = []
    pending: dict[tuple[str, str], EvalRow] = {}
    for entry in entries:
        schema = schemas[entry.db_id]
        for method in sorted(entry.predictions):
            gold, gen, why = _parse_pair(entry, method, schema)
            supported = not why
            ex = None
            if gold is not None and gen is not None and entry.db_id in static:
                try:
                    ex = reference_ex(static[entry.db_id], gen, gold)
                except EvalError as exc:
                    why = f"EX evaluation: {exc}"
                    supported = False
            row = EvalRow(entry.question_id, method, supported, why, ex, None)
            rows.append(row)
            if not supported:
                row.result = TaskResult(
                    task=PairTask(entry.question_id, schema, gold, gen, method),
                    verdict=Inconclusive(Reason.UNSUPPORTED, why),
                    counterexamples=(),
                    cross_checked=(),
                    ex_static=ex,
                )
                continue
            if cfg.verify_only_ex_passes and ex == 0:
                continue  # already wrong under EX; nothing to demote
            task = PairTask(entry.question_id, schema, gold, gen, method)
            tasks.append(task)
            pending[(entry.question_id, method)] = row

    results = run_tasks(tasks, cfg.task, cfg.parallelism)
    for task, result in zip(tasks, results):
        result.ex_static = pending[(task.question_id, task.method)].ex
        pending[(task.question_id, task.method)].result = result
    if cfg.cross_check:
        checked = cross_check(results, cfg.task)
        for task, result in zip(tasks, checked):
            pending[(task.question_id, task.method)].result = result

    scored = score([row.result for row in rows if row.result is not None])
    report = EvalReport(
        scores=scored,
        rows=rows,
        coverage=_coverage(rows),
        cex_rate=_cex_rate(rows),
        mean_cex_secs=_cex_secs(rows, statistics.fmean),
        median_cex_secs=_cex_secs(rows, statistics.median),
        n_questions=len(entries),
    )
    _write_artifacts(report, schemas, cfg)
    return report


def _methods(rows: list[EvalRow]) -> list[str]:
    return sorted({r.method for r in rows})


def _coverage(rows: list[EvalRow]) -> dict[str, float]:
    out = {}
    for m in _methods(rows):
        mine = [r for r in rows if r.method == m]
        out[m] = 100.0 * sum(r.supported for r in mine) / len(mine) if mine else 0.0
    return out


def _cex_rate(rows: list[EvalRow]) -> dict[str, float]:
    out = {}
    for m in _methods(rows):
        mine = [r for r in rows if r.method == m]
        hits = sum(1 for r in mine if isinstance(r.verdict(), NotEquivalent))
        out[m] = 100.0 * hits / len(mine) if mine else 0.0
    return out


def _cex_secs(rows: list[EvalRow], agg) -> dict[str, float]:
    out = {}
    for m in _methods(rows):
        times = [
            r.result.solve_secs + r.result.validate_secs
            for r in rows
            if r.method == m and isinstance(r.verdict(), NotEquivalent)
        ]
        out[m] = agg(times) if times else 0.0
    return out


# ---------------------------------------------------------------------------
# Artifacts


def _verdict_record(row: EvalRow) -> dict:
    rec = {
        "question_id": row.question_id,
        "method": row.method,
        "supported": row.supported,
        "ex": row.ex,
    }
    v = row.verdict()
    if v is None:
        rec["verdict"] = "Skipped" if row.supported else "Unsupported"
    elif isinstance(v, NotEquivalent):
        rec["verdict"] = "NotEquivalent"
        rec["found_at_bound"] = v.found_at_bound
        rec["validated"] = v.validated
        rec["counterexample"] = db_hash(v.db)
    elif isinstance(v, Inconclusive):
        rec["verdict"] = "Inconclusive"
        rec["reason"] = v.reason.value
        if v.detail:
            rec["detail"] = v.detail
    else:
        rec["verdict"] = "EquivalentUpTo"
        rec["k_max"] = v.k_max
    return rec


def _report_table(report: EvalReport) -> str:
    head = ["method", "n", "EX%", "rk", "Verify%", "rk", "Verify+CC%", "rk", "demoted", "cover%"]
    lines = []
    for s in report.scores.methods:
        lines.append(
            [
                s.method,
                str(s.n),
                f"{s.ex_accuracy:.2f}",
                str(s.ex_rank),
                f"{s.verify_accuracy:.2f}",
                str(s.verify_rank),
                f"{s.verify_cc_accuracy:.2f}",
                str(s.verify_cc_rank),
                str(s.demotions_cc),
                f"{report.coverage.get(s.method, 0.0):.1f}",
            ]
        )
    widths = [max(len(r[i]) for r in [head] + lines) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*r) for r in [head] + lines) + "\n"


def _write_artifacts(
    report: EvalReport, schemas: dict[str, DatabaseSchema], cfg: HarnessConfig
) -> None:
    out = Path(cfg.out_dir)
    reports = out / "reports"
    reports.mkdir(parents=True, exist_ok=True)

    (reports / "report.txt").write_text(_report_table(report), encoding="utf-8")
    machine = {
        "n_questions": report.n_questions,
        "methods": [
            {
                "method": s.method,
                "n": s.n,
                "ex_accuracy": round(s.ex_accuracy, 4),
                "verify_accuracy": round(s.verify_accuracy, 4),
                "verify_cc_accuracy": round(s.verify_cc_accuracy, 4),
                "ex_rank": s.ex_rank,
                "verify_rank": s.verify_rank,
                "verify_cc_rank": s.verify_cc_rank,
                "demotions": s.demotions,
                "demotions_cc": s.demotions_cc,
                "coverage": round(report.coverage.get(s.method, 0.0), 4),
            }
            for s in report.scores.methods
        ],
        "demotion_histogram": {
            str(k): v for k, v in sorted(report.scores.histogram().items())
        },
    }
    (reports / "report.json").write_text(
        json.dumps(machine, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    records = sorted(
        (_verdict_record(r) for r in report.rows),
        key=lambda rec: (rec["question_id"], rec["method"]),
    )
    (reports / "verdicts.jsonl").write_text(
        "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in records),
        encoding="utf-8",
    )
    timing = {
        "coverage": {m: round(v, 4) for m, v in report.coverage.items()},
        "counterexample_rate": {m: round(v, 4) for m, v in report.cex_rate.items()},
        "mean_cex_secs": {m: round(v, 6) for m, v in report.mean_cex_secs.items()},
        "median_cex_secs": {m: round(v, 6) for m, v in report.median_cex_secs.items()},
    }
    (reports / "stats.json").write_text(
        json.dumps(timing, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    for row in report.rows:
        result = row.result
        if result is None or not (result.counterexamples or result.cross_checked):
            continue
        db = (result.counterexamples or result.cross_checked)[0]
        d = out / "counterexamples" / row.question_id / row.method
        d.mkdir(parents=True, exist_ok=True)
        (d / "dump.json").write_text(dump_db(db), encoding="utf-8")
        (d / "insert.sql").write_text(insert_script(db), encoding="utf-8")
        if cfg.emit_smtlib:
            _emit_smtlib(d, result)


def _emit_smtlib(d: Path, result: TaskResult) -> None:
    task = result.task
    stop = (
        result.verdict.found_at_bound
        if isinstance(result.verdict, NotEquivalent)
        else 1
    )
    opts = EncodeOpts()
    for k in range(1, stop + 1):
        try:
            f = nonequivalence_formula(task.schema, task.gold, task.generated, k, opts)
        except EncodeError:
            return
        (d / f"bound-{k}.smt2").write_text(f.to_smtlib(), encoding="utf-8")


# ---------------------------------------------------------------------------
# Replay


def replay(
    dump_path: str | Path,
    gold_sql: str,
    gen_sql: str,
    schema: DatabaseSchema,
    write=print,
) -> int:
    """Re-execute a counterexample dump; prints both tables, returns EX."""
    db = load_db(Path(dump_path).read_text(encoding="utf-8"), schema)
    gold = parse_sql(gold_sql, schema)
    gen = parse_sql(gen_sql, schema)
    r_gold = eval_query(db, gold)
    r_gen = eval_query(db, gen)
    ex = ex_metric(r_gold, r_gen)
    write(f"gold      ({len(r_gold)} rows): {_show(r_gold)}")
    write(f"generated ({len(r_gen)} rows): {_show(r_gen)}")
    write(f"EX = {ex}")
    return ex


def _show(rows: list[tuple]) -> str:
    if not rows:
        return "(empty)"
    return "; ".join("(" + ", ".join(map(repr, row)) + ")" for row in rows)
