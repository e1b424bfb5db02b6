"""Concrete-execution backends for counterexample validation.

Two routes to "run both queries on this database and compare result sets":
the in-process reference interpreter, and a real SQLite engine in a child
process. The engine child is the ``sqlite3`` executable when one is named
by $SQLEQ_SQLITE3 or found on PATH; otherwise a Python child embedding the
stdlib engine, speaking a tiny JSON protocol on stdin/stdout (schema script
+ query list in, row arrays out) that keeps result parsing exact.

SQLite returns everything untyped, so rows coming back are normalized
against the query's declared output types before comparison: date text
stays ISO, integer-valued text (strftime fields) is parsed, julian-day
reals are doubled into the interpreter's exact integer scale.

Run as a module (``python -m sqleq.backends``) this file *is* the child.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys

from . import qast as q
from .dumps import insert_script
from .evaluator import ConcreteDb, EvalError, eval_query, ex_metric
from .render import to_sql
from .values import Date


class BackendUnavailable(Exception):
    pass


class EngineError(Exception):
    """The external engine rejected or failed a query."""


# ---------------------------------------------------------------------------
# Reference route


def reference_rows(db: ConcreteDb, node: q.QueryAst) -> list[tuple]:
    return eval_query(db, node)


def reference_ex(db: ConcreteDb, q1: q.QueryAst, q2: q.QueryAst) -> int:
    return ex_metric(eval_query(db, q1), eval_query(db, q2))


# ---------------------------------------------------------------------------
# External SQLite route

_CHILD_TIMEOUT_SECS = 60.0
_CLI_MARKER = "---SQLEQ-RESULT-BREAK---"


def _cli_binary() -> str | None:
    return os.environ.get("SQLEQ_SQLITE3") or shutil.which("sqlite3")


def _run_cli(
    binary: str, script: str, queries: list[str], names: list[list[str]], timeout: float
) -> list[list[list]]:
    stdin = [".bail on", script, ".mode json"]
    for sql in queries:
        stdin.append(sql.rstrip(";") + ";")
        stdin.append(f".print {_CLI_MARKER}")
    try:
        proc = subprocess.run(
            [binary, ":memory:"],
            input="\n".join(stdin) + "\n",
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise BackendUnavailable(f"cannot run {binary!r}: {exc}") from exc
    if proc.returncode != 0:
        raise EngineError(f"{binary} exited {proc.returncode}: {proc.stderr.strip()}")
    segments = proc.stdout.split(_CLI_MARKER)
    if len(segments) != len(queries) + 1:
        raise BackendUnavailable(f"{binary} output did not segment per query")
    results = []
    for seg, cols in zip(segments, names):
        seg = seg.strip()
        try:
            objs = json.loads(seg) if seg else []
        except json.JSONDecodeError as exc:
            raise BackendUnavailable(f"unparseable {binary} output: {exc}") from exc
        results.append([[obj[c] for c in cols] for obj in objs])
    return results


def _run_pychild(script: str, queries: list[str], timeout: float) -> list[list[list]]:
    job = json.dumps({"script": script, "queries": queries})
    try:
        proc = subprocess.run(
            [sys.executable, "-m", "sqleq.backends"],
            input=job,
            capture_output=True,
            text=True,
            timeout=timeout,
            env={**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)},
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise BackendUnavailable(f"cannot run external engine: {exc}") from exc
    if proc.returncode != 0:
        raise BackendUnavailable(
            f"external engine exited {proc.returncode}: {proc.stderr.strip()}"
        )
    try:
        out = json.loads(proc.stdout)
    except json.JSONDecodeError as exc:
        raise BackendUnavailable(f"unparseable engine output: {exc}") from exc
    if "error" in out:
        raise EngineError(out["error"])
    return out["results"]


def _run_engine(
    script: str, queries: list[str], names: list[list[str]], timeout: float
) -> list[list[list]]:
    binary = _cli_binary()
    # The CLI's JSON mode keys rows by column name, so duplicate output
    # names would silently drop cells; those queries go to the child.
    if binary and all(len(set(cols)) == len(cols) for cols in names):
        return _run_cli(binary, script, queries, names, timeout)
    return _run_pychild(script, queries, timeout)


def _normalize_cell(raw: object, t: q.ExprType) -> object:
    if raw is None:
        return None
    if t is q.ExprType.JULIAN:
        # Engine reals are *.0 or *.5; the doubled scale is exact.
        return int(round(float(raw) * 2))
    if t is q.ExprType.INT:
        if isinstance(raw, bool):
            return int(raw)
        if isinstance(raw, int):
            return raw
        if isinstance(raw, str):
            try:
                return int(raw, 10)
            except ValueError:
                return raw
        if isinstance(raw, float) and raw.is_integer():
            return int(raw)
    return raw


def _normalize_ref_cell(v: object, t: q.ExprType) -> object:
    if isinstance(v, Date):
        return f"{v.year:04d}-{v.month:02d}-{v.day:02d}"
    return v


def _norm_rows(rows: list, types: list[q.ExprType], ref: bool) -> set[tuple]:
    fn = _normalize_ref_cell if ref else _normalize_cell
    return {tuple(fn(v, t) for v, t in zip(row, types)) for row in rows}


def sqlite_rows(db: ConcreteDb, node: q.QueryAst, timeout: float = _CHILD_TIMEOUT_SECS) -> set[tuple]:
    """Run one query on a real SQLite engine; normalized result set."""
    names = [[c.name for c in node.out_cols]]
    (raw,) = _run_engine(insert_script(db), [to_sql(node, dialect="sqlite")], names, timeout)
    return _norm_rows(raw, [c.type for c in node.out_cols], ref=False)


def sqlite_ex(
    db: ConcreteDb, q1: q.QueryAst, q2: q.QueryAst, timeout: float = _CHILD_TIMEOUT_SECS
) -> int:
    """Set-equality metric computed entirely by the external engine."""
    script = insert_script(db)
    sqls = [to_sql(q1, dialect="sqlite"), to_sql(q2, dialect="sqlite")]
    names = [[c.name for c in q1.out_cols], [c.name for c in q2.out_cols]]
    raw1, raw2 = _run_engine(script, sqls, names, timeout)
    t1 = [c.type for c in q1.out_cols]
    t2 = [c.type for c in q2.out_cols]
    return int(_norm_rows(raw1, t1, ref=False) == _norm_rows(raw2, t2, ref=False))


def reference_result_set(db: ConcreteDb, node: q.QueryAst) -> set[tuple]:
    """Reference rows normalized the same way, for cross-engine comparison."""
    rows = eval_query(db, node)
    return _norm_rows(rows, [c.type for c in node.out_cols], ref=True)


def run_ex(backend: str, db: ConcreteDb, q1: q.QueryAst, q2: q.QueryAst) -> int:
    if backend == "reference":
        return reference_ex(db, q1, q2)
    if backend == "sqlite":
        return sqlite_ex(db, q1, q2)
    raise ValueError(f"unknown backend {backend!r}")


__all__ = [
    "BackendUnavailable",
    "EngineError",
    "EvalError",
    "reference_ex",
    "reference_result_set",
    "reference_rows",
    "run_ex",
    "sqlite_ex",
    "sqlite_rows",
]


def _child_main() -> int:
    import sqlite3

    try:
        job = json.load(sys.stdin)
        conn = sqlite3.connect(":memory:")
        try:
            conn.executescript(job["script"])
            results = []
            for sql in job["queries"]:
                results.append([list(row) for row in conn.execute(sql).fetchall()])
        finally:
            conn.close()
        payload = {"results": results, "engine": sqlite3.sqlite_version}
    except sqlite3.Error as exc:
        payload = {"error": f"{type(exc).__name__}: {exc}"}
    json.dump(payload, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(_child_main())
