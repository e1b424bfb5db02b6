"""Bounded equivalence checking for a SQL subset.

Given two queries over the same schema, search for a small database on
which they return different result sets. A found database is re-executed
concretely before it is believed; absence of one up to the bound is an
equivalence guarantee over all databases of that size.

    >>> from sqleq import TaskConfig, eqcheck, make_schema, parse_sql
    >>> schema = make_schema({"tables": [
    ...     {"name": "r", "columns": [["id", "int"]], "primary_key": []}]})
    >>> q1 = parse_sql("SELECT id FROM r WHERE id > 1", schema)
    >>> q2 = parse_sql("SELECT id FROM r WHERE id > 2", schema)
    >>> r = eqcheck(schema, q1, q2, TaskConfig())
    >>> r.verdict.found_at_bound
    1
"""

from .dumps import MalformedDump, db_hash, dump_db, insert_script, load_db
from .evaluator import ConcreteDb, EvalError, eval_query, ex_metric
from .features import feature_scan
from .harness import BenchmarkEntry, EvalReport, HarnessConfig, IngestError, replay, run_eval
from .oracle import CeilingExceeded, DomainSpec, enumerate_dbs, oracle_check
from .parser import ParseError, parse_sql
from .pipeline import (
    Backend,
    EquivalentUpTo,
    Inconclusive,
    NotEquivalent,
    PairTask,
    Reason,
    TaskConfig,
    check_bounded,
    cross_check,
    eqcheck,
    run_tasks,
    score,
    validate_counterexample,
)
from .render import to_sql
from .schema import DatabaseSchema, make_schema
from .solver import SolveBudget

__all__ = [
    "Backend",
    "BenchmarkEntry",
    "CeilingExceeded",
    "ConcreteDb",
    "DatabaseSchema",
    "DomainSpec",
    "EquivalentUpTo",
    "EvalError",
    "EvalReport",
    "HarnessConfig",
    "Inconclusive",
    "IngestError",
    "MalformedDump",
    "NotEquivalent",
    "PairTask",
    "ParseError",
    "Reason",
    "SolveBudget",
    "TaskConfig",
    "check_bounded",
    "cross_check",
    "db_hash",
    "dump_db",
    "enumerate_dbs",
    "eqcheck",
    "eval_query",
    "ex_metric",
    "feature_scan",
    "insert_script",
    "load_db",
    "make_schema",
    "oracle_check",
    "parse_sql",
    "replay",
    "run_eval",
    "run_tasks",
    "score",
    "to_sql",
    "validate_counterexample",
]

__version__ = "0.1.0"
