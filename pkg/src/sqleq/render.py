"""AST pretty-printing.

``to_sql(ast)`` emits canonical text that reparses to a structurally
identical tree (desugarings print in desugared form). ``dialect="sqlite"``
emits the same query in SQLite's spelling — ``%m`` for the month field and
``DATE(e)`` instead of ``CAST(e AS DATE)``, which SQLite would treat as a
numeric cast.
"""

from __future__ import annotations

from . import qast as q
from .parser import _HUGE_LEN

_ARITH_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "%": 2}


class _Renderer:
    def __init__(self, dialect: str):
        if dialect not in ("canonical", "sqlite"):
            raise ValueError(f"unknown dialect {dialect!r}")
        self.sqlite = dialect == "sqlite"

    # -- queries ------------------------------------------------------------

    def query(self, node: q.QueryAst) -> str:
        if isinstance(node, q.With):
            defs = ", ".join(
                f"{name} AS ({self.query(d)})" for name, d in zip(node.names, node.defs)
            )
            return f"WITH {defs} {self.compound(node.body)}"
        return self.compound(node)

    def compound(self, node: q.QueryAst) -> str:
        # Visible re-projection over hidden ORDER BY keys prints back as the
        # original SELECT ... ORDER BY <expr> form.
        if isinstance(node, q.Projection) and isinstance(node.sub, q.OrderBy):
            ob = node.sub
            ext = ob.sub
            if (
                isinstance(ext, (q.Projection, q.GroupBy))
                and ext.n_visible < len(ext.attrs)
                and len(node.attrs) == ext.n_visible
                and all(
                    isinstance(a.expr, q.Col) and a.expr.index == i
                    for i, a in enumerate(node.attrs)
                )
            ):
                body = self.select_core(ext, distinct=False, visible_only=True)
                keys = ", ".join(
                    self.expr(ext.attrs[i].expr, self._keys_of(ext))
                    + ("" if ob.ascending else " DESC")
                    for i in ob.key_indices
                )
                tail = f" ORDER BY {keys}"
                if ob.limit is not None:
                    tail += f" LIMIT {ob.limit}"
                return body + tail
        if isinstance(node, q.OrderBy):
            body = self.setop(node.sub)
            tail = ""
            if node.key_indices:
                keys = ", ".join(
                    node.sub.out_cols[i].name + ("" if node.ascending else " DESC")
                    for i in node.key_indices
                )
                tail = f" ORDER BY {keys}"
            if node.limit is not None:
                tail += f" LIMIT {node.limit}"
            return body + tail
        return self.setop(node)

    def setop(self, node: q.QueryAst) -> str:
        if isinstance(node, q.CollectionOp):
            kw = {
                q.SetOpKind.UNION: "UNION",
                q.SetOpKind.UNION_ALL: "UNION ALL",
                q.SetOpKind.INTERSECT: "INTERSECT",
                q.SetOpKind.EXCEPT: "EXCEPT",
            }[node.kind]
            return f"{self.setop(node.left)} {kw} {self.setop(node.right)}"
        if isinstance(node, q.Distinct):
            return self.select_core(node.sub, distinct=True)
        return self.select_core(node, distinct=False)

    def _keys_of(self, node: q.QueryAst) -> tuple[q.Expr, ...]:
        return node.keys if isinstance(node, q.GroupBy) else ()

    def select_core(self, node: q.QueryAst, distinct: bool, visible_only: bool = False) -> str:
        if isinstance(node, (q.RelationRef, q.Rename, q.Filter, q.Join)):
            # Bare relational shape (constructed ASTs only): print implicitly.
            where, from_sql = self._split_from(node)
            out = "SELECT " + ("DISTINCT " if distinct else "") + "*"
            out += f" FROM {from_sql}"
            if where:
                out += f" WHERE {where}"
            return out
        if not isinstance(node, (q.Projection, q.GroupBy)):
            raise ValueError(f"cannot print {type(node).__name__} as a select core")
        keys = self._keys_of(node)
        attrs = node.attrs[: node.n_visible] if visible_only else node.attrs
        items = ", ".join(f"{self.expr(a.expr, keys)} AS {a.name}" for a in attrs)
        where, from_sql = self._split_from(node.sub)
        out = "SELECT " + ("DISTINCT " if distinct else "") + items + f" FROM {from_sql}"
        if where:
            out += f" WHERE {where}"
        if isinstance(node, q.GroupBy):
            if node.keys:
                out += " GROUP BY " + ", ".join(self.expr(k, ()) for k in node.keys)
            if node.having is not None:
                out += " HAVING " + self.pred(node.having, keys)
        return out

    def _split_from(self, node: q.QueryAst) -> tuple[str | None, str]:
        where = None
        if isinstance(node, q.Filter):
            where = self.pred(node.pred, ())
            node = node.sub
        return where, self.from_clause(node)

    def from_clause(self, node: q.QueryAst) -> str:
        if isinstance(node, q.RelationRef):
            return node.name
        if isinstance(node, q.Rename):
            if isinstance(node.sub, q.RelationRef):
                return f"{node.sub.name} AS {node.name}"
            return f"({self.query(node.sub)}) AS {node.name}"
        if isinstance(node, q.Join):
            kw = {
                q.JoinKind.INNER: "JOIN",
                q.JoinKind.LEFT: "LEFT JOIN",
                q.JoinKind.RIGHT: "RIGHT JOIN",
                q.JoinKind.FULL: "FULL JOIN",
                q.JoinKind.CROSS: "CROSS JOIN",
            }[node.kind]
            s = f"{self.from_clause(node.left)} {kw} {self.from_clause(node.right)}"
            if node.on is not None:
                s += f" ON {self.pred(node.on, ())}"
            return s
        return f"({self.query(node)})"

    # -- predicates ---------------------------------------------------------

    def pred(self, p: q.Pred, keys: tuple[q.Expr, ...], prec: int = 0) -> str:
        if isinstance(p, q.Or):
            s = f"{self.pred(p.left, keys, 1)} OR {self.pred(p.right, keys, 2)}"
            return f"({s})" if prec > 1 else s
        if isinstance(p, q.And):
            s = f"{self.pred(p.left, keys, 2)} AND {self.pred(p.right, keys, 3)}"
            return f"({s})" if prec > 2 else s
        if isinstance(p, q.Not):
            inner = p.arg
            if isinstance(inner, q.IsNull):
                return f"{self.expr(inner.arg, keys)} IS NOT NULL"
            if isinstance(inner, q.InList):
                items = ", ".join(self.expr(i, keys) for i in inner.items)
                return f"{self.expr(inner.arg, keys)} NOT IN ({items})"
            if isinstance(inner, q.InSubquery):
                return f"{self.expr(inner.arg, keys)} NOT IN ({self.query(inner.sub)})"
            if isinstance(inner, q.Like):
                return f"{self.expr(inner.arg, keys)} NOT LIKE {_quote(inner.pattern)}"
            return f"NOT {self.pred(inner, keys, 3)}"
        if isinstance(p, q.Cmp):
            return f"{self.expr(p.left, keys)} {p.op} {self.expr(p.right, keys)}"
        if isinstance(p, q.IsNull):
            return f"{self.expr(p.arg, keys)} IS NULL"
        if isinstance(p, q.InList):
            items = ", ".join(self.expr(i, keys) for i in p.items)
            return f"{self.expr(p.arg, keys)} IN ({items})"
        if isinstance(p, q.InSubquery):
            return f"{self.expr(p.arg, keys)} IN ({self.query(p.sub)})"
        if isinstance(p, q.Like):
            return f"{self.expr(p.arg, keys)} LIKE {_quote(p.pattern)}"
        if isinstance(p, q.PrefixOf):
            return f"{self.expr(p.arg, keys)} LIKE {_like_literal(p.prefix, suffix=True)}"
        if isinstance(p, q.SuffixOf):
            return f"{self.expr(p.arg, keys)} LIKE {_like_literal(p.suffix, prefix=True)}"
        if isinstance(p, q.BoolLit):
            return "1 = 1" if p.value else "1 = 0"
        if isinstance(p, q.NullPred):
            return "NULL"
        if isinstance(p, q.ExprPred):
            return self.expr(p.expr, keys)
        raise ValueError(f"cannot print predicate {type(p).__name__}")

    # -- expressions --------------------------------------------------------

    def expr(self, e: q.Expr, keys: tuple[q.Expr, ...], prec: int = 0) -> str:
        if isinstance(e, q.Col):
            return f"{e.table}.{e.name}" if e.table else e.name
        if isinstance(e, q.GroupKeyRef):
            return self.expr(keys[e.index], ())
        if isinstance(e, q.Lit):
            return _lit(e.value)
        if isinstance(e, q.Arith):
            mine = _ARITH_PREC[e.op]
            s = (
                f"{self.expr(e.left, keys, mine)} {e.op} "
                f"{self.expr(e.right, keys, mine + 1)}"
            )
            return f"({s})" if prec > mine else s
        if isinstance(e, q.Ite):
            return (
                f"IIF({self.pred(e.cond, keys)}, {self.expr(e.then, keys)}, "
                f"{self.expr(e.els, keys)})"
            )
        if isinstance(e, q.Case):
            parts = ["CASE"]
            for c, r in e.whens:
                parts.append(f"WHEN {self.pred(c, keys)} THEN {self.expr(r, keys)}")
            if e.els is not None:
                parts.append(f"ELSE {self.expr(e.els, keys)}")
            parts.append("END")
            return " ".join(parts)
        if isinstance(e, q.SubStr):
            subject = self.expr(e.subject, keys)
            start = self.expr(e.start, keys)
            if e.length == q.Lit(_HUGE_LEN, q.ExprType.INT):
                return f"SUBSTR({subject}, {start})"
            return f"SUBSTR({subject}, {start}, {self.expr(e.length, keys)})"
        if isinstance(e, q.Strftime):
            fmt = e.fmt
            if self.sqlite and fmt == "%M":
                fmt = "%m"
            return f"STRFTIME({_quote(fmt)}, {self.expr(e.arg, keys)})"
        if isinstance(e, q.JulianDay):
            return f"JULIANDAY({self.expr(e.arg, keys)})"
        if isinstance(e, q.ToInt):
            return f"CAST({self.expr(e.arg, keys)} AS INTEGER)"
        if isinstance(e, q.ToStr):
            return f"CAST({self.expr(e.arg, keys)} AS TEXT)"
        if isinstance(e, q.ToDate):
            if self.sqlite:
                return f"DATE({self.expr(e.arg, keys)})"
            return f"CAST({self.expr(e.arg, keys)} AS DATE)"
        if isinstance(e, q.PredExpr):
            return f"IIF({self.pred(e.pred, keys)}, 1, 0)"
        if isinstance(e, q.Agg):
            name = e.func.name
            if e.arg is None:
                return f"{name}(*)"
            inner = self.expr(e.arg, ())
            return f"{name}(DISTINCT {inner})" if e.distinct else f"{name}({inner})"
        raise ValueError(f"cannot print expression {type(e).__name__}")


def _lit(v) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return _quote(v)
    # Date value (constructed ASTs only; the parser keeps dates as strings).
    return f"'{v.year:04d}-{v.month:02d}-{v.day:02d}'"


def _quote(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def _like_literal(s: str, prefix: bool = False, suffix: bool = False) -> str:
    if "%" in s or "_" in s:
        raise ValueError("prefix/suffix pattern contains LIKE metacharacters")
    return _quote(("%" if prefix else "") + s + ("%" if suffix else ""))


def to_sql(node: q.QueryAst, dialect: str = "canonical") -> str:
    return _Renderer(dialect).query(node)
