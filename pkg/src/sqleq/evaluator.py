"""Reference interpreter: the ground-truth denotation of a query over a
concrete database.

Deliberately naive — nested loops, no indexes — so it stays an auditable
oracle for both the symbolic encoder and the external engine. Rows are plain
tuples; a relation is an ordered list of rows whose order is meaningful only
under ORDER BY.

Julian-day values never leave a query (the frontend rejects that); internally
they are integers at twice the real value, so the .5-offset stays exact.
Mixed julian/integer comparisons scale the integer side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import qast as q
from . import values as V
from .schema import DatabaseSchema, SqlType
from .values import Date, Value

Row = tuple[Value, ...]
Relation = list[Row]


class EvalError(Exception):
    pass


class TypeMismatch(EvalError):
    pass


@dataclass
class ConcreteDb:
    schema: DatabaseSchema
    tables: dict[str, list[Row]] = field(default_factory=dict)

    def rows(self, name: str) -> list[Row]:
        return self.tables.get(name.lower(), [])


_TYPE_OK = {
    SqlType.INT: int,
    SqlType.STR: str,
    SqlType.DATE: Date,
}


def conform_db(db: ConcreteDb, check_keys: bool = True) -> None:
    """Raise EvalError unless db is a valid instance of its schema."""
    for name in db.tables:
        if db.schema.table(name) is None:
            raise EvalError(f"rows for unknown table {name!r}")
    for table in db.schema.tables:
        rows = db.rows(table.name)
        for row in rows:
            if len(row) != len(table.columns):
                raise EvalError(
                    f"arity {len(row)} != {len(table.columns)} in {table.name!r}"
                )
            for v, col in zip(row, table.columns):
                if v is not None and not isinstance(v, _TYPE_OK[col.type]):
                    raise EvalError(
                        f"{table.name}.{col.name}: {v!r} is not {col.type.value}"
                    )
        if check_keys and table.primary_key:
            idx = [table.column_index(c) for c in table.primary_key]
            seen = set()
            for row in rows:
                key = tuple(row[i] for i in idx)
                if any(v is None for v in key):
                    raise EvalError(f"NULL in primary key of {table.name!r}")
                if key in seen:
                    raise EvalError(f"duplicate primary key {key!r} in {table.name!r}")
                seen.add(key)


# ---------------------------------------------------------------------------
# Value-level helpers


def _num(v: Value) -> int | None:
    if v is None or isinstance(v, int):
        return v
    if isinstance(v, str):
        return V.str_to_int(v)
    return V.date_to_int(v)


def _julian(v: Value, t: q.ExprType) -> int | None:
    """Normalize one comparison operand to the doubled julian scale."""
    if v is None:
        return None
    if t == q.ExprType.JULIAN:
        return v  # already scaled
    if isinstance(v, Date):
        return V.julian_day(v)
    n = _num(v)
    return None if n is None else 2 * n


def _sort_key(v: Value):
    # NULL < numbers < text; dates live with text in padded ISO form so the
    # lexicographic order is the calendar order.
    if v is None:
        return (0, 0, "")
    if isinstance(v, int):
        return (1, v, "")
    if isinstance(v, Date):
        return (2, 0, f"{v.year:04d}-{v.month:02d}-{v.day:02d}")
    return (2, 0, v)


def _row_key(row: Row):
    return tuple(_sort_key(v) for v in row)


def _dedupe(rows: Relation) -> Relation:
    seen = set()
    out = []
    for r in rows:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# Interpreter


class _Eval:
    def __init__(self, db: ConcreteDb):
        self.db = db
        self._sub_cache: dict[int, list[Value]] = {}
        # Cleared whenever a LIMIT cuts through a run of equal sort keys:
        # the kept row set then depends on the tie-break, and no single
        # deterministic choice can speak for every engine.
        self.determined = True

    # -- queries ------------------------------------------------------------

    def query(self, node: q.QueryAst, env: dict[str, Relation]) -> Relation:
        if isinstance(node, q.RelationRef):
            hit = env.get(node.name.lower())
            if hit is not None:
                return list(hit)
            return list(self.db.rows(node.name))
        if isinstance(node, q.Rename):
            return self.query(node.sub, env)
        if isinstance(node, q.Projection):
            rows = self.query(node.sub, env)
            return [
                tuple(self.expr(a.expr, r, env) for a in node.attrs) for r in rows
            ]
        if isinstance(node, q.Filter):
            rows = self.query(node.sub, env)
            return [r for r in rows if self.pred(node.pred, r, env) is True]
        if isinstance(node, q.Join):
            return self.join(node, env)
        if isinstance(node, q.Distinct):
            return _dedupe(self.query(node.sub, env))
        if isinstance(node, q.CollectionOp):
            left = self.query(node.left, env)
            right = self.query(node.right, env)
            if node.kind == q.SetOpKind.UNION_ALL:
                return left + right
            if node.kind == q.SetOpKind.UNION:
                return _dedupe(left + right)
            rset = set(right)
            if node.kind == q.SetOpKind.INTERSECT:
                return [r for r in _dedupe(left) if r in rset]
            return [r for r in _dedupe(left) if r not in rset]
        if isinstance(node, q.GroupBy):
            return self.group_by(node, env)
        if isinstance(node, q.OrderBy):
            return self.order_by(node, env)
        if isinstance(node, q.With):
            env = dict(env)
            for name, d in zip(node.names, node.defs):
                env[name.lower()] = self.query(d, env)
            return self.query(node.body, env)
        raise EvalError(f"cannot evaluate {type(node).__name__}")

    def join(self, node: q.Join, env: dict[str, Relation]) -> Relation:
        left = self.query(node.left, env)
        right = self.query(node.right, env)
        ln = len(node.left.out_cols)
        rn = len(node.right.out_cols)
        out: Relation = []
        if node.kind == q.JoinKind.CROSS:
            return [l + r for l in left for r in right]
        lmatched = [False] * len(left)
        rmatched = [False] * len(right)
        for i, l in enumerate(left):
            for j, r in enumerate(right):
                joined = l + r
                if node.on is None or self.pred(node.on, joined, env) is True:
                    out.append(joined)
                    lmatched[i] = True
                    rmatched[j] = True
        if node.kind in (q.JoinKind.LEFT, q.JoinKind.FULL):
            pad: Row = (None,) * rn
            out.extend(l + pad for i, l in enumerate(left) if not lmatched[i])
        if node.kind in (q.JoinKind.RIGHT, q.JoinKind.FULL):
            pad = (None,) * ln
            out.extend(pad + r for j, r in enumerate(right) if not rmatched[j])
        return out

    def group_by(self, node: q.GroupBy, env: dict[str, Relation]) -> Relation:
        rows = self.query(node.sub, env)
        if node.keys:
            groups: dict[Row, list[Row]] = {}
            for r in rows:
                key = tuple(self.expr(k, r, env) for k in node.keys)
                groups.setdefault(key, []).append(r)
            items = list(groups.items())
        else:
            items = [((), rows)]  # global aggregate: one group even when empty
        out = []
        for key, members in items:
            if node.having is not None:
                if self.group_pred(node.having, key, members, env) is not True:
                    continue
            out.append(
                tuple(self.group_expr(a.expr, key, members, env) for a in node.attrs)
            )
        return out

    def order_by(self, node: q.OrderBy, env: dict[str, Relation]) -> Relation:
        rows = list(self.query(node.sub, env))
        key = lambda r: tuple(_sort_key(r[i]) for i in node.key_indices)
        if node.key_indices:
            # Stable two-pass sort: full-row ascending tie-break first, then
            # the requested keys.
            rows.sort(key=_row_key)
            rows.sort(key=key, reverse=not node.ascending)
        if node.limit is not None and node.limit >= 0:
            cut = node.limit
            if 0 < cut < len(rows):
                if not node.key_indices or key(rows[cut - 1]) == key(rows[cut]):
                    self.determined = False
            rows = rows[:cut]
        return rows

    # -- group context ------------------------------------------------------

    def group_expr(self, e: q.Expr, key: Row, members: Relation, env) -> Value:
        if isinstance(e, q.GroupKeyRef):
            return key[e.index]
        if isinstance(e, q.Agg):
            return self.aggregate(e, members, env)
        if isinstance(e, q.Lit):
            return e.value
        if isinstance(e, q.Arith):
            return self._arith(
                e,
                self.group_expr(e.left, key, members, env),
                self.group_expr(e.right, key, members, env),
            )
        if isinstance(e, q.Ite):
            c = self.group_pred(e.cond, key, members, env)
            return self.group_expr(e.then if c is True else e.els, key, members, env)
        if isinstance(e, q.Case):
            for c, r in e.whens:
                if self.group_pred(c, key, members, env) is True:
                    return self.group_expr(r, key, members, env)
            return None if e.els is None else self.group_expr(e.els, key, members, env)
        if isinstance(e, q.SubStr):
            return V.substr(
                self.group_expr(e.subject, key, members, env),
                self.group_expr(e.start, key, members, env),
                self.group_expr(e.length, key, members, env),
            )
        if isinstance(e, q.Strftime):
            d = V.cast_to_date(self.group_expr(e.arg, key, members, env))
            return None if d is None else V.strftime_component(e.fmt, d)
        if isinstance(e, q.JulianDay):
            d = V.cast_to_date(self.group_expr(e.arg, key, members, env))
            return None if d is None else V.julian_day(d)
        if isinstance(e, q.ToInt):
            return V.cast_to_int(self.group_expr(e.arg, key, members, env))
        if isinstance(e, q.ToStr):
            return V.cast_to_str(self.group_expr(e.arg, key, members, env))
        if isinstance(e, q.ToDate):
            return V.cast_to_date(self.group_expr(e.arg, key, members, env))
        if isinstance(e, q.PredExpr):
            t = self.group_pred(e.pred, key, members, env)
            return None if t is None else int(t)
        raise EvalError(f"cannot evaluate {type(e).__name__} in group context")

    def group_pred(self, p: q.Pred, key: Row, members: Relation, env):
        if isinstance(p, q.And):
            return V.kleene_and(
                self.group_pred(p.left, key, members, env),
                self.group_pred(p.right, key, members, env),
            )
        if isinstance(p, q.Or):
            return V.kleene_or(
                self.group_pred(p.left, key, members, env),
                self.group_pred(p.right, key, members, env),
            )
        if isinstance(p, q.Not):
            return V.kleene_not(self.group_pred(p.arg, key, members, env))
        if isinstance(p, q.Cmp):
            return self._cmp(
                p,
                self.group_expr(p.left, key, members, env),
                self.group_expr(p.right, key, members, env),
            )
        if isinstance(p, q.IsNull):
            return self.group_expr(p.arg, key, members, env) is None
        if isinstance(p, q.InList):
            v = self.group_expr(p.arg, key, members, env)
            vals = [(self.group_expr(i, key, members, env), i.type) for i in p.items]
            return self._in(v, p.arg.type, vals)
        if isinstance(p, q.InSubquery):
            v = self.group_expr(p.arg, key, members, env)
            return self._in_sub(v, p, env)
        if isinstance(p, q.Like):
            s = V.cast_to_str(self.group_expr(p.arg, key, members, env))
            return V.like_match(p.pattern, s)
        if isinstance(p, q.PrefixOf):
            return V.prefix_of(p.prefix, V.cast_to_str(self.group_expr(p.arg, key, members, env)))
        if isinstance(p, q.SuffixOf):
            return V.suffix_of(p.suffix, V.cast_to_str(self.group_expr(p.arg, key, members, env)))
        if isinstance(p, q.BoolLit):
            return p.value
        if isinstance(p, q.NullPred):
            return None
        if isinstance(p, q.ExprPred):
            return V.truth_of(self.group_expr(p.expr, key, members, env))
        raise EvalError(f"cannot evaluate {type(p).__name__} in group context")

    def aggregate(self, e: q.Agg, members: Relation, env) -> Value:
        if e.func == q.AggFunc.COUNT and e.arg is None:
            return len(members)
        vals = [self.expr(e.arg, r, env) for r in members]
        vals = [v for v in vals if v is not None]
        if e.distinct:
            vals = _dedupe([(v,) for v in vals])
            vals = [v[0] for v in vals]
        if e.func == q.AggFunc.COUNT:
            return len(vals)
        if not vals:
            return None
        if e.func == q.AggFunc.MIN:
            return min(vals, key=_sort_key)
        if e.func == q.AggFunc.MAX:
            return max(vals, key=_sort_key)
        nums = [_num(v) for v in vals]
        nums = [n for n in nums if n is not None]
        if not nums:
            return None
        total = sum(nums)
        if e.func == q.AggFunc.SUM:
            return total
        return V.fdiv(total, len(nums))  # AVG: integer semantics throughout

    # -- row context --------------------------------------------------------

    def expr(self, e: q.Expr, row: Row, env) -> Value:
        if isinstance(e, q.Col):
            return row[e.index]
        if isinstance(e, q.Lit):
            return e.value
        if isinstance(e, q.Arith):
            return self._arith(e, self.expr(e.left, row, env), self.expr(e.right, row, env))
        if isinstance(e, q.Ite):
            c = self.pred(e.cond, row, env)
            return self.expr(e.then if c is True else e.els, row, env)
        if isinstance(e, q.Case):
            for c, r in e.whens:
                if self.pred(c, row, env) is True:
                    return self.expr(r, row, env)
            return None if e.els is None else self.expr(e.els, row, env)
        if isinstance(e, q.SubStr):
            return V.substr(
                self.expr(e.subject, row, env),
                self.expr(e.start, row, env),
                self.expr(e.length, row, env),
            )
        if isinstance(e, q.Strftime):
            d = V.cast_to_date(self.expr(e.arg, row, env))
            return None if d is None else V.strftime_component(e.fmt, d)
        if isinstance(e, q.JulianDay):
            d = V.cast_to_date(self.expr(e.arg, row, env))
            return None if d is None else V.julian_day(d)
        if isinstance(e, q.ToInt):
            return V.cast_to_int(self.expr(e.arg, row, env))
        if isinstance(e, q.ToStr):
            return V.cast_to_str(self.expr(e.arg, row, env))
        if isinstance(e, q.ToDate):
            return V.cast_to_date(self.expr(e.arg, row, env))
        if isinstance(e, q.PredExpr):
            t = self.pred(e.pred, row, env)
            return None if t is None else int(t)
        if isinstance(e, q.Agg):
            raise EvalError("aggregate outside group context")
        raise EvalError(f"cannot evaluate {type(e).__name__}")

    def pred(self, p: q.Pred, row: Row, env):
        if isinstance(p, q.And):
            return V.kleene_and(self.pred(p.left, row, env), self.pred(p.right, row, env))
        if isinstance(p, q.Or):
            return V.kleene_or(self.pred(p.left, row, env), self.pred(p.right, row, env))
        if isinstance(p, q.Not):
            return V.kleene_not(self.pred(p.arg, row, env))
        if isinstance(p, q.Cmp):
            return self._cmp(p, self.expr(p.left, row, env), self.expr(p.right, row, env))
        if isinstance(p, q.IsNull):
            return self.expr(p.arg, row, env) is None
        if isinstance(p, q.InList):
            v = self.expr(p.arg, row, env)
            vals = [(self.expr(i, row, env), i.type) for i in p.items]
            return self._in(v, p.arg.type, vals)
        if isinstance(p, q.InSubquery):
            return self._in_sub(self.expr(p.arg, row, env), p, env)
        if isinstance(p, q.Like):
            return V.like_match(p.pattern, V.cast_to_str(self.expr(p.arg, row, env)))
        if isinstance(p, q.PrefixOf):
            return V.prefix_of(p.prefix, V.cast_to_str(self.expr(p.arg, row, env)))
        if isinstance(p, q.SuffixOf):
            return V.suffix_of(p.suffix, V.cast_to_str(self.expr(p.arg, row, env)))
        if isinstance(p, q.BoolLit):
            return p.value
        if isinstance(p, q.NullPred):
            return None
        if isinstance(p, q.ExprPred):
            return V.truth_of(self.expr(p.expr, row, env))
        raise EvalError(f"cannot evaluate {type(p).__name__}")

    # -- shared operator semantics -------------------------------------------

    def _arith(self, e: q.Arith, lv: Value, rv: Value) -> Value:
        lt, rt = e.left.type, e.right.type
        if q.ExprType.JULIAN in (lt, rt):
            l = lv if lt == q.ExprType.JULIAN else _scale2(lv)
            r = rv if rt == q.ExprType.JULIAN else _scale2(rv)
        else:
            l, r = _num(lv), _num(rv)
        if l is None or r is None:
            return None
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        if e.op == "/":
            return V.fdiv(l, r)
        return V.fmod(l, r)

    def _cmp(self, p: q.Cmp, lv: Value, rv: Value):
        lt, rt = p.left.type, p.right.type
        if q.ExprType.JULIAN in (lt, rt):
            return V.compare_values(p.op, _julian(lv, lt), _julian(rv, rt))
        return V.compare_values(p.op, lv, rv)

    def _in(self, v: Value, vt: q.ExprType, items: list[tuple[Value, q.ExprType]]):
        saw_null = False
        for iv, it in items:
            if q.ExprType.JULIAN in (vt, it):
                eq = V.compare_values("=", _julian(v, vt), _julian(iv, it))
            else:
                eq = V.compare_values("=", v, iv)
            if eq is True:
                return True
            if eq is None:
                saw_null = True
        return None if saw_null else False

    def _in_sub(self, v: Value, p: q.InSubquery, env):
        cache_key = id(p.sub)
        vals = self._sub_cache.get(cache_key)
        if vals is None:
            vals = [r[0] for r in self.query(p.sub, env)]
            self._sub_cache[cache_key] = vals
        it = p.sub.out_cols[0].type
        return self._in(v, p.arg.type, [(x, it) for x in vals])


def _scale2(v: Value) -> int | None:
    n = _num(v)
    return None if n is None else 2 * n


def eval_query(db: ConcreteDb, node: q.QueryAst) -> Relation:
    return _Eval(db).query(node, {})


def eval_query_det(db: ConcreteDb, node: q.QueryAst) -> tuple[Relation, bool]:
    """Evaluate, also reporting whether the result is fully determined.

    False means some LIMIT truncated inside a run of equal sort keys, so a
    conforming engine could legitimately return a different row set."""
    ev = _Eval(db)
    rows = ev.query(node, {})
    return rows, ev.determined


def ex_metric(r1: Relation, r2: Relation) -> int:
    """1 iff both produce the same set of rows; duplicates and order ignored."""
    return 1 if set(r1) == set(r2) else 0
