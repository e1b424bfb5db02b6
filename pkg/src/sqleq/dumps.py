"""Counterexample database serialization.

Two interchangeable forms of the same database: a structured-text dump
(tagged scalars, canonical row order, stable hash) for diffing and dedup,
and a SQL script for replay against a real SQLite process. Dates travel as
zero-padded ISO text in both — SQLite has no date type, and padding keeps
its string comparisons consistent with date order.
"""

from __future__ import annotations

import hashlib
import json

from .evaluator import ConcreteDb, Row, conform_db
from .schema import DatabaseSchema, SqlType, TableSchema
from .values import Date, Value


class MalformedDump(Exception):
    pass


_SQL_TYPE = {SqlType.INT: "INTEGER", SqlType.STR: "TEXT", SqlType.DATE: "TEXT"}


def _iso(d: Date) -> str:
    return f"{d.year:04d}-{d.month:02d}-{d.day:02d}"


def _tag(v: Value) -> object:
    if v is None:
        return "null"
    if isinstance(v, bool):
        raise TypeError("bool is not a database value")
    if isinstance(v, int):
        return {"int": v}
    if isinstance(v, str):
        return {"str": v}
    return {"date": _iso(v)}


def _untag(cell: object, want: SqlType, where: str) -> Value:
    if cell == "null":
        return None
    if not isinstance(cell, dict) or len(cell) != 1:
        raise MalformedDump(f"{where}: malformed cell {cell!r}")
    ((tag, raw),) = cell.items()
    if tag == "int" and want is SqlType.INT and isinstance(raw, int):
        return raw
    if tag == "str" and want is SqlType.STR and isinstance(raw, str):
        return raw
    if tag == "date" and want is SqlType.DATE and isinstance(raw, str):
        try:
            y, m, d = (int(part) for part in raw.split("-"))
            return Date(y, m, d)
        except (ValueError, TypeError) as exc:
            raise MalformedDump(f"{where}: bad date {raw!r}") from exc
    raise MalformedDump(f"{where}: {tag!r} cell where {want.value} expected")


def _row_key(row: Row) -> tuple:
    # NULL sorts first; Date keys by its components so tuples stay comparable.
    out = []
    for v in row:
        if v is None:
            out.append((0, 0))
        elif isinstance(v, Date):
            out.append((1, (v.year, v.month, v.day)))
        else:
            out.append((1, v))
    return tuple(out)


def canonical_rows(rows: list[Row]) -> list[Row]:
    return sorted(rows, key=_row_key)


def dump_db(db: ConcreteDb) -> str:
    """Canonical structured-text form: same database, same bytes."""
    tables = {
        t.name.lower(): [[_tag(v) for v in row] for row in canonical_rows(db.rows(t.name))]
        for t in db.schema.tables
    }
    return json.dumps({"tables": tables}, sort_keys=True, separators=(",", ":")) + "\n"


def db_hash(db: ConcreteDb) -> str:
    return hashlib.sha256(dump_db(db).encode("utf-8")).hexdigest()


def load_db(text: str, schema: DatabaseSchema) -> ConcreteDb:
    """Parse a dump back into a database, validating against the schema."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDump(f"not valid dump text: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("tables"), dict):
        raise MalformedDump("dump has no 'tables' object")
    raw_tables = obj["tables"]
    for name in raw_tables:
        if schema.table(name) is None:
            raise MalformedDump(f"dump has rows for unknown table {name!r}")
    db = ConcreteDb(schema)
    for table in schema.tables:
        key = table.name.lower()
        if key not in raw_tables:
            raise MalformedDump(f"dump is missing table {table.name!r}")
        rows = []
        for i, raw_row in enumerate(raw_tables[key]):
            if not isinstance(raw_row, list) or len(raw_row) != len(table.columns):
                raise MalformedDump(f"{table.name} row {i}: wrong arity")
            rows.append(
                tuple(
                    _untag(cell, col.type, f"{table.name}.{col.name} row {i}")
                    for cell, col in zip(raw_row, table.columns)
                )
            )
        db.tables[key] = rows
    conform_db(db)
    return db


def _sql_literal(v: Value) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return f"'{_iso(v)}'"


def _create_table(table: TableSchema) -> str:
    cols = [f'"{c.name}" {_SQL_TYPE[c.type]}' for c in table.columns]
    if table.primary_key:
        keys = ", ".join(f'"{c}"' for c in table.primary_key)
        cols.append(f"PRIMARY KEY ({keys})")
    return f'CREATE TABLE "{table.name}" ({", ".join(cols)});'


def insert_script(db: ConcreteDb) -> str:
    """Self-sufficient SQL replay script (CREATE TABLE + INSERTs)."""
    lines = ["BEGIN;"]
    for table in db.schema.tables:
        lines.append(_create_table(table))
        for row in canonical_rows(db.rows(table.name)):
            values = ", ".join(_sql_literal(v) for v in row)
            lines.append(f'INSERT INTO "{table.name}" VALUES ({values});')
    lines.append("COMMIT;")
    return "\n".join(lines) + "\n"


def _from_engine(raw: object, want: SqlType, where: str) -> Value:
    if raw is None:
        return None
    if want is SqlType.INT and isinstance(raw, int):
        return raw
    if want is SqlType.STR and isinstance(raw, str):
        return raw
    if want is SqlType.DATE and isinstance(raw, str):
        try:
            y, m, d = (int(part) for part in raw.split("-"))
            return Date(y, m, d)
        except (ValueError, TypeError):
            pass
    raise MalformedDump(f"{where}: {raw!r} is not {want.value}")


def load_insert_script(script: str, schema: DatabaseSchema) -> ConcreteDb:
    """Materialize an INSERT script and read it back as a database.

    The script may carry its own CREATE TABLE statements (as emitted by
    insert_script) or hold bare INSERTs against the schema's tables; either
    way the rows read back must conform."""
    import sqlite3

    ddl = "\n".join(_create_table(t) for t in schema.tables)

    def attempt(prelude: str) -> ConcreteDb:
        conn = sqlite3.connect(":memory:")
        try:
            try:
                if prelude:
                    conn.executescript(prelude)
                conn.executescript(script)
            except sqlite3.Error as exc:
                raise MalformedDump(f"script does not execute: {exc}") from exc
            db = ConcreteDb(schema)
            for table in schema.tables:
                try:
                    cur = conn.execute(f'SELECT * FROM "{table.name}"')
                except sqlite3.Error as exc:
                    raise MalformedDump(
                        f"script is missing table {table.name!r}"
                    ) from exc
                if len(cur.description) != len(table.columns):
                    raise MalformedDump(f"{table.name}: script arity mismatch")
                db.tables[table.name.lower()] = [
                    tuple(
                        _from_engine(raw, col.type, f"{table.name}.{col.name}")
                        for raw, col in zip(row, table.columns)
                    )
                    for row in cur.fetchall()
                ]
            conform_db(db)
            return db
        finally:
            conn.close()

    try:
        return attempt("")
    except MalformedDump:
        # Scripts of bare INSERTs carry no DDL of their own; retry with the
        # schema's CREATE TABLE statements in place.
        return attempt(ddl)
