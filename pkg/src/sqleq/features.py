"""Support classification for parsed queries.

Most out-of-subset constructs are rejected while parsing; feature_scan covers
the residue that only shows up on a well-formed tree (julian-day values
escaping into result rows) and tallies construct kinds for coverage stats.
scan_sql() folds parser rejections into the same report so callers can
classify raw text in one step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import qast as q
from .parser import ParseError, parse_sql
from .schema import DatabaseSchema


@dataclass(frozen=True)
class SupportReport:
    supported: bool
    reasons: tuple[str, ...] = ()
    constructs: frozenset[str] = field(default_factory=frozenset)

    def __bool__(self) -> bool:
        return self.supported


def _walk_exprs(e: q.Expr):
    yield e
    if isinstance(e, q.Arith):
        yield from _walk_exprs(e.left)
        yield from _walk_exprs(e.right)
    elif isinstance(e, q.Ite):
        yield from _walk_preds(e.cond)
        yield from _walk_exprs(e.then)
        yield from _walk_exprs(e.els)
    elif isinstance(e, q.Case):
        for c, r in e.whens:
            yield from _walk_preds(c)
            yield from _walk_exprs(r)
        if e.els is not None:
            yield from _walk_exprs(e.els)
    elif isinstance(e, q.SubStr):
        yield from _walk_exprs(e.subject)
        yield from _walk_exprs(e.start)
        yield from _walk_exprs(e.length)
    elif isinstance(e, (q.Strftime, q.JulianDay, q.ToInt, q.ToDate, q.ToStr)):
        yield from _walk_exprs(e.arg)
    elif isinstance(e, q.PredExpr):
        yield from _walk_preds(e.pred)
    elif isinstance(e, q.Agg) and e.arg is not None:
        yield from _walk_exprs(e.arg)


def _walk_preds(p: q.Pred):
    yield p
    if isinstance(p, q.Cmp):
        yield from _walk_exprs(p.left)
        yield from _walk_exprs(p.right)
    elif isinstance(p, (q.And, q.Or)):
        yield from _walk_preds(p.left)
        yield from _walk_preds(p.right)
    elif isinstance(p, q.Not):
        yield from _walk_preds(p.arg)
    elif isinstance(p, q.IsNull):
        yield from _walk_exprs(p.arg)
    elif isinstance(p, q.InList):
        yield from _walk_exprs(p.arg)
        for i in p.items:
            yield from _walk_exprs(i)
    elif isinstance(p, q.InSubquery):
        yield from _walk_exprs(p.arg)
        yield from _walk_queries(p.sub)
    elif isinstance(p, (q.Like, q.PrefixOf, q.SuffixOf)):
        yield from _walk_exprs(p.arg)
    elif isinstance(p, q.ExprPred):
        yield from _walk_exprs(p.expr)


def _walk_queries(node: q.QueryAst):
    """Every node of every family reachable from `node`, subqueries included."""
    yield node
    if isinstance(node, q.Rename):
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.Projection):
        for a in node.attrs:
            yield from _walk_exprs(a.expr)
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.Filter):
        yield from _walk_preds(node.pred)
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.Join):
        if node.on is not None:
            yield from _walk_preds(node.on)
        yield from _walk_queries(node.left)
        yield from _walk_queries(node.right)
    elif isinstance(node, q.Distinct):
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.CollectionOp):
        yield from _walk_queries(node.left)
        yield from _walk_queries(node.right)
    elif isinstance(node, q.GroupBy):
        for k in node.keys:
            yield from _walk_exprs(k)
        for a in node.attrs:
            yield from _walk_exprs(a.expr)
        if node.having is not None:
            yield from _walk_preds(node.having)
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.OrderBy):
        yield from _walk_queries(node.sub)
    elif isinstance(node, q.With):
        for d in node.defs:
            yield from _walk_queries(d)
        yield from _walk_queries(node.body)


def feature_scan(node: q.QueryAst) -> SupportReport:
    constructs: set[str] = set()
    reasons: list[str] = []
    for n in _walk_queries(node):
        constructs.add(type(n).__name__)
    for oc in node.out_cols:
        if oc.type == q.ExprType.JULIAN:
            reasons.append(f"julian-day value in result column {oc.name!r}")
    return SupportReport(not reasons, tuple(reasons), frozenset(constructs))


def scan_sql(text: str, schema: DatabaseSchema) -> SupportReport:
    """Parse + feature_scan, with every parser rejection folded into the
    report — a malformed prediction is as unusable as an out-of-subset one."""
    try:
        ast = parse_sql(text, schema)
    except ParseError as e:
        return SupportReport(False, (e.reason,), frozenset())
    return feature_scan(ast)
