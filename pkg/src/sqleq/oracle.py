"""Brute-force equivalence oracle.

Enumerates every concrete database over small finite value pools (0..k rows
per table, duplicate rows allowed, NULL always a candidate cell) and decides
bounded equivalence by running both queries on each one. Exponential and
proud of it — the point is an independent ground truth the symbolic route
can be differenced against, so there is deliberately no cleverness to share
a bug with.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import qast as q
from .evaluator import ConcreteDb, EvalError, conform_db, eval_query, ex_metric
from .schema import DatabaseSchema, SqlType
from .values import Date, Value, is_valid_date

DEFAULT_CEILING = 10_000_000

# The string defaults cover the classic trouble spots: empty string,
# sign-only text that casts to 0, and a plain letter.
_DEFAULT_STRINGS = ("", "a", "+-", "-")


class CeilingExceeded(Exception):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Finite search space: per-type value pools and a max row count."""

    ints: tuple[int, ...] = (0, 1)
    strings: tuple[str, ...] = _DEFAULT_STRINGS
    dates: tuple[Date, ...] = (Date(2000, 1, 1),)
    k: int = 1
    ceiling: int = DEFAULT_CEILING

    def __post_init__(self) -> None:
        if not self.ints or not self.strings or not self.dates:
            raise ValueError("every value pool must be non-empty")
        if self.k < 0:
            raise ValueError("k must be >= 0")
        for d in self.dates:
            if not is_valid_date(d.year, d.month, d.day):
                raise ValueError(f"invalid date in pool: {d}")

    def pool(self, t: SqlType) -> tuple[Value, ...]:
        base = {
            SqlType.INT: self.ints,
            SqlType.STR: self.strings,
            SqlType.DATE: self.dates,
        }[t]
        return (None,) + tuple(base)


@dataclass(frozen=True)
class Equivalent:
    dbs_checked: int


@dataclass(frozen=True)
class NotEquivalent:
    witness: ConcreteDb
    dbs_checked: int


def _candidate_count(schema: DatabaseSchema, spec: DomainSpec) -> int:
    total = 1
    for table in schema.tables:
        rows = 1
        for col in table.columns:
            rows *= len(spec.pool(col.type))
        total *= sum(rows**r for r in range(spec.k + 1))
    return total


def enumerate_dbs(schema: DatabaseSchema, spec: DomainSpec):
    """All databases over the pools, deterministic order, no duplicates.

    Databases violating a declared primary key are skipped (they conform to
    no instance of the schema), but they still count against the ceiling.
    """
    if _candidate_count(schema, spec) > spec.ceiling:
        raise CeilingExceeded(
            f"{_candidate_count(schema, spec)} candidate databases "
            f"exceed the ceiling of {spec.ceiling}"
        )
    per_table = []
    for table in schema.tables:
        row_space = list(itertools.product(*[spec.pool(c.type) for c in table.columns]))
        fills: list[tuple] = []
        for r in range(spec.k + 1):
            fills.extend(itertools.product(row_space, repeat=r))
        per_table.append(fills)
    for combo in itertools.product(*per_table):
        db = ConcreteDb(schema)
        for table, rows in zip(schema.tables, combo):
            db.tables[table.name.lower()] = list(rows)
        try:
            conform_db(db)
        except EvalError:
            continue
        yield db


def oracle_check(
    schema: DatabaseSchema, q1: q.QueryAst, q2: q.QueryAst, spec: DomainSpec
) -> Equivalent | NotEquivalent:
    """First database where the result sets differ, else equivalence
    over the whole domain."""
    checked = 0
    for db in enumerate_dbs(schema, spec):
        checked += 1
        if ex_metric(eval_query(db, q1), eval_query(db, q2)) == 0:
            return NotEquivalent(db, checked)
    return Equivalent(checked)
