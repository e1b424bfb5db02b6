"""Database schemas: tables, typed columns, optional primary keys.

Schema files are JSON: ``{"db_id": ..., "tables": [{"name": ..., "columns":
[["col", "int"|"str"|"date"], ...], "primary_key": [...]?}, ...]}``.
Identifiers compare case-insensitively everywhere.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field


class SqlType(enum.Enum):
    INT = "int"
    STR = "str"
    DATE = "date"


class SchemaError(Exception):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    type: SqlType


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[Column, ...]
    primary_key: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen = set()
        for c in self.columns:
            if c.name.lower() in seen:
                raise SchemaError(f"duplicate column {c.name!r} in table {self.name!r}")
            seen.add(c.name.lower())
        for k in self.primary_key:
            if k.lower() not in seen:
                raise SchemaError(f"primary key column {k!r} not in table {self.name!r}")

    def column_index(self, name: str) -> int | None:
        low = name.lower()
        for i, c in enumerate(self.columns):
            if c.name.lower() == low:
                return i
        return None


@dataclass(frozen=True)
class DatabaseSchema:
    tables: tuple[TableSchema, ...]
    db_id: str = ""
    _by_name: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        by_name = {}
        for t in self.tables:
            key = t.name.lower()
            if key in by_name:
                raise SchemaError(f"duplicate table name {t.name!r}")
            by_name[key] = t
        object.__setattr__(self, "_by_name", by_name)

    def table(self, name: str) -> TableSchema | None:
        return self._by_name.get(name.lower())


def make_schema(spec: dict, db_id: str = "") -> DatabaseSchema:
    """Build a DatabaseSchema from the parsed JSON shape."""
    if "tables" not in spec:
        raise SchemaError("schema document missing 'tables'")
    tables = []
    for tdoc in spec["tables"]:
        if "name" not in tdoc or "columns" not in tdoc:
            raise SchemaError("table entry missing 'name' or 'columns'")
        cols = []
        for cdoc in tdoc["columns"]:
            cname, ckind = cdoc[0], cdoc[1]
            try:
                ctype = SqlType(ckind)
            except ValueError:
                raise SchemaError(f"unknown type keyword {ckind!r} for column {cname!r}")
            cols.append(Column(cname, ctype))
        tables.append(
            TableSchema(
                name=tdoc["name"],
                columns=tuple(cols),
                primary_key=tuple(tdoc.get("primary_key", ())),
            )
        )
    return DatabaseSchema(tables=tuple(tables), db_id=db_id or spec.get("db_id", ""))


def load_schema(text: str) -> DatabaseSchema:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"schema document is not valid JSON: {e}") from e
    return make_schema(doc)
