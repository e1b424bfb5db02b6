"""Typed query ASTs.

Design notes:
  - Nodes are frozen dataclasses; parsing resolves every column reference to a
    positional index in its row context, so evaluator and encoder never look
    names up.
  - Expressions carry a static type (INT/STR/DATE, plus the internal JULIAN
    for julian-day arithmetic). Predicates are a separate node family.
  - ORDER BY keys always reference *output columns* of the node they wrap;
    the parser materializes hidden key columns in the projection when a key
    is not among the selected attributes, and re-projects the visible prefix
    on top (documented desugaring, semantics-preserving).
  - Inside GroupBy attributes/HAVING, grouped expressions appear as
    GroupKeyRef leaves and raw column references occur only under aggregates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .values import Value


class ExprType(enum.Enum):
    INT = "int"
    STR = "str"
    DATE = "date"
    JULIAN = "julian"


class JoinKind(enum.Enum):
    INNER = "inner"
    LEFT = "left"
    RIGHT = "right"
    FULL = "full"
    CROSS = "cross"


class SetOpKind(enum.Enum):
    UNION = "union"
    UNION_ALL = "union all"
    INTERSECT = "intersect"
    EXCEPT = "except"


class AggFunc(enum.Enum):
    COUNT = "count"
    MIN = "min"
    MAX = "max"
    SUM = "sum"
    AVG = "avg"


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Col(Expr):
    """Resolved column reference: position `index` in the current row context."""

    index: int
    type: ExprType
    table: str | None = None
    name: str = ""


@dataclass(frozen=True)
class GroupKeyRef(Expr):
    """Reference to the i-th GROUP BY key, in attribute/HAVING position."""

    index: int
    type: ExprType
    name: str = ""


@dataclass(frozen=True)
class Lit(Expr):
    value: Value
    type: ExprType


@dataclass(frozen=True)
class Arith(Expr):
    op: str  # + - * / %
    left: Expr
    right: Expr
    type: ExprType


@dataclass(frozen=True)
class Ite(Expr):
    cond: "Pred"
    then: Expr
    els: Expr
    type: ExprType


@dataclass(frozen=True)
class Case(Expr):
    whens: tuple[tuple["Pred", Expr], ...]
    els: Expr | None
    type: ExprType


@dataclass(frozen=True)
class SubStr(Expr):
    subject: Expr
    start: Expr
    length: Expr
    type: ExprType = ExprType.STR


@dataclass(frozen=True)
class Strftime(Expr):
    fmt: str  # %Y / %M / %d (month may be spelled %m in source)
    arg: Expr
    type: ExprType = ExprType.INT


@dataclass(frozen=True)
class JulianDay(Expr):
    arg: Expr
    type: ExprType = ExprType.JULIAN


@dataclass(frozen=True)
class ToInt(Expr):
    arg: Expr
    type: ExprType = ExprType.INT


@dataclass(frozen=True)
class ToDate(Expr):
    arg: Expr
    type: ExprType = ExprType.DATE


@dataclass(frozen=True)
class ToStr(Expr):
    arg: Expr
    type: ExprType = ExprType.STR


@dataclass(frozen=True)
class PredExpr(Expr):
    """A predicate in expression position: true→1, false→0, unknown→NULL."""

    pred: "Pred"
    type: ExprType = ExprType.INT


@dataclass(frozen=True)
class Agg(Expr):
    """Aggregate call; `arg` is None for COUNT(*). Legal only under GroupBy."""

    func: AggFunc
    arg: Expr | None
    distinct: bool
    type: ExprType


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True)
class Pred:
    pass


@dataclass(frozen=True)
class BoolLit(Pred):
    value: bool


@dataclass(frozen=True)
class NullPred(Pred):
    """The NULL literal used as a predicate — always unknown."""


@dataclass(frozen=True)
class Cmp(Pred):
    op: str  # = != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class IsNull(Pred):
    arg: Expr


@dataclass(frozen=True)
class InList(Pred):
    arg: Expr
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class InSubquery(Pred):
    arg: Expr
    sub: "QueryAst"


@dataclass(frozen=True)
class And(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Or(Pred):
    left: Pred
    right: Pred


@dataclass(frozen=True)
class Not(Pred):
    arg: Pred


@dataclass(frozen=True)
class Like(Pred):
    pattern: str
    arg: Expr


@dataclass(frozen=True)
class PrefixOf(Pred):
    prefix: str
    arg: Expr


@dataclass(frozen=True)
class SuffixOf(Pred):
    suffix: str
    arg: Expr


@dataclass(frozen=True)
class ExprPred(Pred):
    """An expression in predicate position, coerced to boolean."""

    expr: Expr


# ---------------------------------------------------------------------------
# Query operators


@dataclass(frozen=True)
class OutCol:
    name: str
    type: ExprType


@dataclass(frozen=True)
class QueryAst:
    pass


@dataclass(frozen=True)
class RelationRef(QueryAst):
    name: str
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class Rename(QueryAst):
    sub: QueryAst
    name: str
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class Attr:
    expr: Expr
    name: str


@dataclass(frozen=True)
class Projection(QueryAst):
    sub: QueryAst
    attrs: tuple[Attr, ...]
    out_cols: tuple[OutCol, ...]
    n_visible: int  # prefix length kept by visible SELECT list (rest = order keys)


@dataclass(frozen=True)
class Filter(QueryAst):
    sub: QueryAst
    pred: Pred
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class Join(QueryAst):
    kind: JoinKind
    left: QueryAst
    right: QueryAst
    on: Pred | None
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class Distinct(QueryAst):
    sub: QueryAst
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class CollectionOp(QueryAst):
    kind: SetOpKind
    left: QueryAst
    right: QueryAst
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class GroupBy(QueryAst):
    """Grouped aggregation; empty `keys` means one global group (even when
    the input is empty)."""

    sub: QueryAst
    keys: tuple[Expr, ...]
    attrs: tuple[Attr, ...]
    having: Pred | None
    out_cols: tuple[OutCol, ...]
    n_visible: int


@dataclass(frozen=True)
class OrderBy(QueryAst):
    """ORDER BY + optional LIMIT. `key_indices` point at output columns of
    `sub`; an empty key list with a limit is a bare LIMIT (nondeterministic,
    flagged for validation)."""

    sub: QueryAst
    key_indices: tuple[int, ...]
    ascending: bool
    limit: int | None
    out_cols: tuple[OutCol, ...]


@dataclass(frozen=True)
class With(QueryAst):
    names: tuple[str, ...]
    defs: tuple[QueryAst, ...]
    body: QueryAst
    out_cols: tuple[OutCol, ...]


def out_cols_of(q: QueryAst) -> tuple[OutCol, ...]:
    return q.out_cols


def iter_query_nodes(q: QueryAst):
    """Yield every query-operator node in `q`, pre-order."""
    yield q
    if isinstance(q, (Rename, Projection, Filter, Distinct, OrderBy)):
        yield from iter_query_nodes(q.sub)
    elif isinstance(q, (Join, CollectionOp)):
        yield from iter_query_nodes(q.left)
        yield from iter_query_nodes(q.right)
    elif isinstance(q, GroupBy):
        yield from iter_query_nodes(q.sub)
    elif isinstance(q, With):
        for d in q.defs:
            yield from iter_query_nodes(d)
        yield from iter_query_nodes(q.body)
