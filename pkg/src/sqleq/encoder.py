"""Symbolic encoding: query pair + bound k → quantifier-free formula.

The encoding is functional: each operator's output tuples are *derived terms*
over the symbolic database cells, not fresh variables tied by constraints.
The only true unknowns in a formula are the base-table cells (deletion flag,
null flags, payloads) and the witness-selection booleans introduced by
ORDER BY … LIMIT. Everything else partial-evaluates once those are assigned,
which is what the model search exploits.

Null logic: predicates are encoded three-valued as a (truth, unknown) term
pair and collapsed to "definitely true" exactly where SQL collapses them
(WHERE, HAVING, join conditions, CASE guards). Result-set comparison uses
null-identity equality — Null equals Null — matching how result tables are
compared as row sets, not SQL's ternary `=`.

Julian-day values ride on integer terms at twice their real value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import qast as q
from .schema import DatabaseSchema, SqlType
from .terms import BOOL, INT, STR, Store, Term
from .values import Date

ET = q.ExprType

_SORT_OF = {SqlType.INT: INT, SqlType.STR: STR}
_KIND_OF = {SqlType.INT: ET.INT, SqlType.STR: ET.STR, SqlType.DATE: ET.DATE}

MIN_YEAR = 0
MAX_YEAR = 9999

DEFAULT_OUTPUT_CEILING = 64


class EncodeError(Exception):
    pass


class TypeMismatch(EncodeError):
    pass


class ArityMismatch(EncodeError):
    pass


class BoundOverflow(EncodeError):
    pass


@dataclass(frozen=True)
class DateTriple:
    y: Term
    m: Term
    d: Term


@dataclass(frozen=True)
class SymValue:
    kind: ET
    null: Term
    payload: Term | DateTriple


@dataclass(frozen=True)
class SymTuple:
    values: tuple[SymValue, ...]
    deleted: Term


@dataclass(frozen=True)
class SymRelation:
    tuples: tuple[SymTuple, ...]
    # Set when this relation is a duplicate-elimination of another one; the
    # two have identical row *sets* by construction, which the equivalence
    # constraint exploits as a structural fold.
    dedupe_of: "SymRelation | None" = None

    def __len__(self):
        return len(self.tuples)


@dataclass(frozen=True)
class Cell:
    """One base-table slot the search assigns: which table/row/column, its
    kind, and the variable terms holding it."""

    table: str
    row: int
    col: str
    kind: ET
    null: Term
    payload: tuple[Term, ...]  # one term, or (y, m, d)
    in_pk: bool


@dataclass
class SymDb:
    schema: DatabaseSchema
    store: Store
    relations: dict[str, SymRelation]
    constraints: list[Term]
    cells: list[Cell]
    del_flags: list[Term]
    k: int
    output_ceiling: int = DEFAULT_OUTPUT_CEILING
    aux_constraints: list[Term] = field(default_factory=list)
    sel_vars: list[Term] = field(default_factory=list)
    nondeterministic: bool = False
    # Conjunct roots that hold by construction (date well-formedness, the
    # canonical content of deleted rows, live-rows-first ordering). Domain
    # analysis must not treat anything reachable only through these as a
    # semantic use of a cell.
    structural_tids: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class EncodingResult:
    result: SymRelation
    constraints: Term


_DEFAULTS = {ET.INT: 0, ET.STR: ""}


def alloc_symbolic_db(
    schema: DatabaseSchema,
    k: int,
    row_counts: dict[str, int] | None = None,
) -> SymDb:
    """Allocate k symbolic rows per table (or `row_counts[name]` rows where
    given — a table no query reads may soundly get zero)."""
    if k < 1:
        raise ValueError("bound must admit at least one tuple")
    st = Store()
    relations = {}
    constraints: list[Term] = []
    structural: set[int] = set()
    cells: list[Cell] = []
    del_flags: list[Term] = []

    def keep(t: Term) -> Term:
        constraints.append(t)
        structural.add(t.tid)
        return t

    for table in schema.tables:
        tuples = []
        pk = set(table.primary_key)
        n = k if row_counts is None else row_counts.get(table.name.lower(), k)
        for i in range(n):
            deleted = st.fresh(f"{table.name}!{i}!del", BOOL)
            del_flags.append(deleted)
            vals = []
            for col in table.columns:
                base = f"{table.name}!{i}!{col.name}"
                null = st.fresh(base + "!null", BOOL)
                kind = _KIND_OF[col.type]
                if col.type == SqlType.DATE:
                    y = st.fresh(base + "!y", INT)
                    m = st.fresh(base + "!m", INT)
                    d = st.fresh(base + "!d", INT)
                    payload: Term | DateTriple = DateTriple(y, m, d)
                    terms = (y, m, d)
                    # Well-formedness: in-range year/month, day fits month;
                    # a null cell's payload is unconstrained.
                    wf = st.and_(
                        st.le(st.lit(MIN_YEAR), y),
                        st.le(y, st.lit(MAX_YEAR)),
                        st.le(st.lit(1), m),
                        st.le(m, st.lit(12)),
                        st.le(st.lit(1), d),
                        st.le(d, st.days_in_month(y, m)),
                    )
                    keep(st.or_(null, wf))
                    defaults = (st.lit(1), st.lit(1), st.lit(1))
                else:
                    p = st.fresh(base, _SORT_OF[col.type])
                    payload = p
                    terms = (p,)
                    defaults = (st.lit(_DEFAULTS[kind]),)
                cells.append(Cell(table.name, i, col.name, kind, null, terms, col.name in pk))
                vals.append(SymValue(kind, null, payload))
                # Deleted rows carry fixed canonical content so that a model
                # is determined by its live rows alone.
                canon = [st.not_(null)] + [
                    st.eq(t, dflt) for t, dflt in zip(terms, defaults)
                ]
                keep(st.implies(deleted, st.and_(*canon)))
            tuples.append(SymTuple(tuple(vals), deleted))
        # Canonical row order: live rows first. Sound for satisfiability —
        # rows of a base table are interchangeable.
        for i in range(n - 1):
            keep(st.implies(tuples[i].deleted, tuples[i + 1].deleted))
        if pk:
            idx = [table.column_index(c) for c in table.primary_key]
            for i in range(n):
                live = st.not_(tuples[i].deleted)
                for c in idx:
                    constraints.append(st.implies(live, st.not_(tuples[i].values[c].null)))
            for i in range(n):
                for j in range(i + 1, n):
                    both = st.and_(
                        st.not_(tuples[i].deleted), st.not_(tuples[j].deleted)
                    )
                    same = st.and_(*[
                        _payload_eq(st, tuples[i].values[c], tuples[j].values[c])
                        for c in idx
                    ])
                    constraints.append(st.implies(both, st.not_(same)))
        relations[table.name.lower()] = SymRelation(tuple(tuples))
    db = SymDb(schema, st, relations, constraints, cells, del_flags, k)
    db.structural_tids = structural
    return db


def _payload_eq(st: Store, a: SymValue, b: SymValue) -> Term:
    pa, pb = a.payload, b.payload
    if isinstance(pa, DateTriple) and isinstance(pb, DateTriple):
        return st.and_(st.eq(pa.y, pb.y), st.eq(pa.m, pb.m), st.eq(pa.d, pb.d))
    if isinstance(pa, DateTriple) or isinstance(pb, DateTriple):
        raise TypeMismatch("date payload compared against scalar payload")
    return st.eq(pa, pb)


def _identity_eq(st: Store, a: SymValue, b: SymValue) -> Term:
    """Null-identity equality: both null, or both non-null with equal values."""
    if a.kind != b.kind and ET.DATE in (a.kind, b.kind):
        # Differently-typed result columns never reach here (the frontend
        # enforces positional type equality); defensive only.
        raise TypeMismatch(f"identity compare {a.kind} vs {b.kind}")
    if a.kind != b.kind:
        ia, _ = _as_int_term(st, a)
        ib, _ = _as_int_term(st, b)
        same = st.eq(ia, ib)
    else:
        same = _payload_eq(st, a, b)
    return st.or_(
        st.and_(a.null, b.null),
        st.and_(st.not_(a.null), st.not_(b.null), same),
    )


# ---------------------------------------------------------------------------
# Kind coercions. Each returns (converted payload, extra-null term): the
# conversion itself can produce SQL Null (e.g. an unparseable date).


def _as_int_term(st: Store, v: SymValue) -> tuple[Term, Term]:
    if v.kind in (ET.INT, ET.JULIAN):
        return v.payload, st.FALSE
    if v.kind == ET.STR:
        return st.str_to_int(v.payload), st.FALSE
    t = v.payload
    return (
        st.add(
            st.mul(t.y, st.lit(10_000)),
            st.add(st.mul(t.m, st.lit(100)), t.d),
        ),
        st.FALSE,
    )


def _pad2(st: Store, n: Term) -> Term:
    s = st.int_to_str(n)
    return st.ite(st.lt(n, st.lit(10)), st.concat(st.lit("0"), s), s)


def _as_str_term(st: Store, v: SymValue) -> tuple[Term, Term]:
    if v.kind == ET.STR:
        return v.payload, st.FALSE
    if v.kind in (ET.INT, ET.JULIAN):
        return st.int_to_str(v.payload), st.FALSE
    t = v.payload
    dash = st.lit("-")
    return (
        st.concat(
            st.int_to_str(t.y), dash, _pad2(st, t.m), dash, _pad2(st, t.d)
        ),
        st.FALSE,
    )


def _date_valid(st: Store, y: Term, m: Term, d: Term) -> Term:
    return st.and_(
        st.le(st.lit(MIN_YEAR), y),
        st.le(y, st.lit(MAX_YEAR)),
        st.le(st.lit(1), m),
        st.le(m, st.lit(12)),
        st.le(st.lit(1), d),
        st.le(d, st.days_in_month(y, m)),
    )


def _int_to_date(st: Store, v: Term) -> tuple[DateTriple, Term]:
    y = st.fdiv(v, st.lit(10_000))
    m = st.fdiv(st.fmod(v, st.lit(10_000)), st.lit(100))
    d = st.fmod(v, st.lit(100))
    return DateTriple(y, m, d), st.not_(_date_valid(st, y, m, d))


def _as_date_triple(st: Store, v: SymValue) -> tuple[DateTriple, Term]:
    """(triple, extra-null). Mirrors the cast lattice: strings try the ISO
    shape first (invalid component values mean Null, not fallback), any other
    shape falls back through string→int→date."""
    if v.kind == ET.DATE:
        return v.payload, st.FALSE
    if v.kind in (ET.INT, ET.JULIAN):
        return _int_to_date(st, v.payload)
    s = v.payload
    iso = st.str_is_iso(s)
    yi = st.str_iso_part(s, 0)
    mi = st.str_iso_part(s, 1)
    di = st.str_iso_part(s, 2)
    iso_bad = st.not_(_date_valid(st, yi, mi, di))
    ft, fallback_bad = _int_to_date(st, st.str_to_int(s))
    y = st.ite(iso, yi, ft.y)
    m = st.ite(iso, mi, ft.m)
    d = st.ite(iso, di, ft.d)
    return DateTriple(y, m, d), st.ite(iso, iso_bad, fallback_bad)


def _null_value(st: Store, kind: ET) -> SymValue:
    if kind == ET.DATE:
        payload: Term | DateTriple = DateTriple(st.lit(1), st.lit(1), st.lit(1))
    else:
        payload = st.lit(_DEFAULTS.get(kind, 0))
    return SymValue(kind, st.TRUE, payload)


def _julian_term(st: Store, v: SymValue) -> tuple[Term, Term]:
    """Normalize a comparison operand to the doubled julian scale."""
    if v.kind == ET.JULIAN:
        return v.payload, st.FALSE
    if v.kind == ET.INT:
        return st.mul(st.lit(2), v.payload), st.FALSE
    if v.kind == ET.DATE:
        t = v.payload
        return st.julian_scaled(t.y, t.m, t.d), st.FALSE
    triple, bad = _as_date_triple(st, v)
    return st.julian_scaled(triple.y, triple.m, triple.d), bad


# ---------------------------------------------------------------------------
# Expression encoding (row context)


class _Encoder:
    def __init__(self, ctx: SymDb):
        self.ctx = ctx
        self.st = ctx.store
        self._cte: dict[str, SymRelation] = {}

    # -- expressions ----------------------------------------------------------

    def expr(self, row: tuple[SymValue, ...], e: q.Expr) -> SymValue:
        st = self.st
        if isinstance(e, q.Col):
            return row[e.index]
        if isinstance(e, q.Lit):
            if e.value is None:
                return _null_value(st, e.type)
            if isinstance(e.value, Date):
                v = e.value
                return SymValue(
                    ET.DATE,
                    st.FALSE,
                    DateTriple(st.lit(v.year), st.lit(v.month), st.lit(v.day)),
                )
            return SymValue(e.type, st.FALSE, st.lit(e.value))
        if isinstance(e, q.Arith):
            return self._arith(row, e)
        if isinstance(e, q.Ite):
            c = self.pred(row, e.cond)
            return _merge(st, c, self.expr(row, e.then), self.expr(row, e.els), e.type)
        if isinstance(e, q.Case):
            out = (
                _null_value(st, e.type)
                if e.els is None
                else self.expr(row, e.els)
            )
            for cond, res in reversed(e.whens):
                c = self.pred(row, cond)
                out = _merge(st, c, self.expr(row, res), out, e.type)
            return out
        if isinstance(e, q.SubStr):
            return self._substr(row, e)
        if isinstance(e, q.Strftime):
            arg = self.expr(row, e.arg)
            triple, bad = _as_date_triple(st, arg)
            comp = {"%Y": triple.y, "%M": triple.m, "%d": triple.d}[e.fmt]
            return SymValue(ET.INT, st.or_(arg.null, bad), comp)
        if isinstance(e, q.JulianDay):
            arg = self.expr(row, e.arg)
            triple, bad = _as_date_triple(st, arg)
            return SymValue(
                ET.JULIAN,
                st.or_(arg.null, bad),
                st.julian_scaled(triple.y, triple.m, triple.d),
            )
        if isinstance(e, q.ToInt):
            arg = self.expr(row, e.arg)
            p, bad = _as_int_term(st, arg)
            return SymValue(ET.INT, st.or_(arg.null, bad), p)
        if isinstance(e, q.ToStr):
            arg = self.expr(row, e.arg)
            p, bad = _as_str_term(st, arg)
            return SymValue(ET.STR, st.or_(arg.null, bad), p)
        if isinstance(e, q.ToDate):
            arg = self.expr(row, e.arg)
            triple, bad = _as_date_triple(st, arg)
            return SymValue(ET.DATE, st.or_(arg.null, bad), triple)
        if isinstance(e, q.PredExpr):
            t, n = self.pred3(row, e.pred)
            return SymValue(ET.INT, n, st.ite(t, st.lit(1), st.lit(0)))
        if isinstance(e, (q.Agg, q.GroupKeyRef)):
            raise EncodeError(f"{type(e).__name__} outside group context")
        raise EncodeError(f"cannot encode {type(e).__name__}")

    def _arith(self, row, e: q.Arith) -> SymValue:
        st = self.st
        lv = self.expr(row, e.left)
        rv = self.expr(row, e.right)
        if ET.JULIAN in (lv.kind, rv.kind):
            lt_, ln = _julian_scaled_operand(st, lv)
            rt_, rn = _julian_scaled_operand(st, rv)
            kind = ET.JULIAN
        else:
            lt_, ln = _as_int_term(st, lv)
            rt_, rn = _as_int_term(st, rv)
            kind = ET.INT
        null = st.or_(lv.null, rv.null, ln, rn)
        if e.op == "+":
            p = st.add(lt_, rt_)
        elif e.op == "-":
            p = st.sub(lt_, rt_)
        elif e.op == "*":
            p = st.mul(lt_, rt_)
        elif e.op == "/":
            null = st.or_(null, st.eq(rt_, st.lit(0)))
            p = st.fdiv(lt_, rt_)
        else:
            null = st.or_(null, st.eq(rt_, st.lit(0)))
            p = st.fmod(lt_, rt_)
        return SymValue(kind, null, p)

    def _substr(self, row, e: q.SubStr) -> SymValue:
        st = self.st
        subj = self.expr(row, e.subject)
        start = self.expr(row, e.start)
        length = self.expr(row, e.length)
        s, sbad = _as_str_term(st, subj)
        # A non-integer start/length yields Null outright, by kind.
        if start.kind not in (ET.INT, ET.JULIAN) or length.kind not in (ET.INT, ET.JULIAN):
            return _null_value(st, ET.STR)
        null = st.or_(subj.null, start.null, length.null, sbad)
        return SymValue(ET.STR, null, st.substr(s, start.payload, length.payload))

    # -- predicates -----------------------------------------------------------

    def pred(self, row, p: q.Pred) -> Term:
        t, n = self.pred3(row, p)
        return self.st.and_(t, self.st.not_(n))

    def pred3(self, row, p: q.Pred) -> tuple[Term, Term]:
        st = self.st
        if isinstance(p, (q.And, q.Or)):
            pairs = [self.pred3(row, leaf) for leaf in _pred_leaves(p, type(p))]
            return (_and3 if isinstance(p, q.And) else _or3)(st, pairs)
        if isinstance(p, q.Not):
            t, n = self.pred3(row, p.arg)
            return st.and_(st.not_(t), st.not_(n)), n
        if isinstance(p, q.Cmp):
            return self._cmp3(self.expr(row, p.left), p.op, self.expr(row, p.right))
        if isinstance(p, q.IsNull):
            return self.expr(row, p.arg).null, st.FALSE
        if isinstance(p, q.InList):
            v = self.expr(row, p.arg)
            pairs = [self._cmp3(v, "=", self.expr(row, i)) for i in p.items]
            return _fold_or3(st, pairs)
        if isinstance(p, q.InSubquery):
            return self._in_subquery(row, p)
        if isinstance(p, q.Like):
            arg = self.expr(row, p.arg)
            s, bad = _as_str_term(st, arg)
            return st.like(p.pattern, s), st.or_(arg.null, bad)
        if isinstance(p, q.PrefixOf):
            arg = self.expr(row, p.arg)
            s, bad = _as_str_term(st, arg)
            return st.prefix_of(p.prefix, s), st.or_(arg.null, bad)
        if isinstance(p, q.SuffixOf):
            arg = self.expr(row, p.arg)
            s, bad = _as_str_term(st, arg)
            return st.suffix_of(p.suffix, s), st.or_(arg.null, bad)
        if isinstance(p, q.BoolLit):
            return st.lit(p.value), st.FALSE
        if isinstance(p, q.NullPred):
            return st.FALSE, st.TRUE
        if isinstance(p, q.ExprPred):
            v = self.expr(row, p.expr)
            t, bad = _as_int_term(st, v)
            return st.not_(st.eq(t, st.lit(0))), st.or_(v.null, bad)
        raise EncodeError(f"cannot encode predicate {type(p).__name__}")

    def _cmp3(self, a: SymValue, op: str, b: SymValue) -> tuple[Term, Term]:
        st = self.st
        null = st.or_(a.null, b.null)
        if ET.JULIAN in (a.kind, b.kind):
            at, an = _julian_term(st, a)
            bt, bn = _julian_term(st, b)
            return _int_cmp(st, op, at, bt), st.or_(null, an, bn)
        if a.kind == b.kind and a.kind != ET.DATE:
            return _int_cmp(st, op, a.payload, b.payload), null
        if ET.DATE in (a.kind, b.kind):
            other = b if a.kind == ET.DATE else a
            if other.kind == ET.INT:
                # date vs int: compare on the yyyymmdd integer image.
                at, _ = _as_int_term(st, a)
                bt, _ = _as_int_term(st, b)
                return _int_cmp(st, op, at, bt), null
            if other.kind == ET.STR:
                ta, na = _as_date_triple(st, a)
                tb, nb = _as_date_triple(st, b)
                return _triple_cmp(st, op, ta, tb), st.or_(null, na, nb)
            return _triple_cmp(st, op, a.payload, b.payload), null
        # int vs str: the string side reads as an integer.
        at, _ = _as_int_term(st, a)
        bt, _ = _as_int_term(st, b)
        return _int_cmp(st, op, at, bt), null

    def _in_subquery(self, row, p: q.InSubquery) -> tuple[Term, Term]:
        st = self.st
        v = self.expr(row, p.arg)
        enc = self.query(p.sub)
        if enc.constraints is not st.TRUE:
            self.ctx.aux_constraints.append(enc.constraints)
        pairs = []
        for t in enc.result.tuples:
            et, en = self._cmp3(v, "=", t.values[0])
            live = st.not_(t.deleted)
            pairs.append((st.and_(live, et), st.and_(live, en)))
        return _fold_or3(st, pairs)

    # -- group context ---------------------------------------------------------

    def group_expr(self, keys: tuple[SymValue, ...], members: list[tuple[Term, tuple[SymValue, ...]]], e: q.Expr) -> SymValue:
        st = self.st
        if isinstance(e, q.GroupKeyRef):
            return keys[e.index]
        if isinstance(e, q.Agg):
            return self._aggregate(members, e)
        if isinstance(e, q.Lit):
            return self.expr((), e)
        if isinstance(e, q.Arith):
            fake = q.Arith(e.op, q.Col(0, e.left.type), q.Col(1, e.right.type), e.type)
            lv = self.group_expr(keys, members, e.left)
            rv = self.group_expr(keys, members, e.right)
            return _Encoder._arith(self, (lv, rv), fake)
        if isinstance(e, q.Ite):
            c, n = self.group_pred3(keys, members, e.cond)
            cc = st.and_(c, st.not_(n))
            return _merge(st, cc, self.group_expr(keys, members, e.then), self.group_expr(keys, members, e.els), e.type)
        if isinstance(e, q.Case):
            out = (
                _null_value(st, e.type)
                if e.els is None
                else self.group_expr(keys, members, e.els)
            )
            for cond, res in reversed(e.whens):
                c, n = self.group_pred3(keys, members, cond)
                cc = st.and_(c, st.not_(n))
                out = _merge(st, cc, self.group_expr(keys, members, res), out, e.type)
            return out
        if isinstance(e, (q.SubStr, q.Strftime, q.JulianDay, q.ToInt, q.ToStr, q.ToDate, q.PredExpr)):
            # Route through row context over a synthetic row of the
            # already-encoded child values.
            return self._via_row(keys, members, e)
        raise EncodeError(f"cannot encode {type(e).__name__} in group context")

    def _via_row(self, keys, members, e: q.Expr) -> SymValue:
        children = _group_children(e)
        row = tuple(self.group_expr(keys, members, c) for c in children)
        rewritten = _rewrite_children(e, [q.Col(i, c.type) for i, c in enumerate(children)])
        return self.expr(row, rewritten)

    def group_pred3(self, keys, members, p: q.Pred) -> tuple[Term, Term]:
        st = self.st
        if isinstance(p, (q.And, q.Or)):
            pairs = [self.group_pred3(keys, members, leaf) for leaf in _pred_leaves(p, type(p))]
            return (_and3 if isinstance(p, q.And) else _or3)(st, pairs)
        if isinstance(p, q.Not):
            t, n = self.group_pred3(keys, members, p.arg)
            return st.and_(st.not_(t), st.not_(n)), n
        if isinstance(p, q.Cmp):
            return self._cmp3(
                self.group_expr(keys, members, p.left), p.op, self.group_expr(keys, members, p.right)
            )
        if isinstance(p, q.IsNull):
            return self.group_expr(keys, members, p.arg).null, st.FALSE
        if isinstance(p, q.InList):
            v = self.group_expr(keys, members, p.arg)
            pairs = [self._cmp3(v, "=", self.group_expr(keys, members, i)) for i in p.items]
            return _fold_or3(st, pairs)
        if isinstance(p, q.InSubquery):
            v = self.group_expr(keys, members, p.arg)
            enc = self.query(p.sub)
            if enc.constraints is not st.TRUE:
                self.ctx.aux_constraints.append(enc.constraints)
            pairs = []
            for t in enc.result.tuples:
                et, en = self._cmp3(v, "=", t.values[0])
                live = st.not_(t.deleted)
                pairs.append((st.and_(live, et), st.and_(live, en)))
            return _fold_or3(st, pairs)
        if isinstance(p, (q.Like, q.PrefixOf, q.SuffixOf)):
            arg = self.group_expr(keys, members, p.arg)
            s, bad = _as_str_term(st, arg)
            if isinstance(p, q.Like):
                return st.like(p.pattern, s), st.or_(arg.null, bad)
            if isinstance(p, q.PrefixOf):
                return st.prefix_of(p.prefix, s), st.or_(arg.null, bad)
            return st.suffix_of(p.suffix, s), st.or_(arg.null, bad)
        if isinstance(p, q.BoolLit):
            return st.lit(p.value), st.FALSE
        if isinstance(p, q.NullPred):
            return st.FALSE, st.TRUE
        if isinstance(p, q.ExprPred):
            v = self.group_expr(keys, members, p.expr)
            t, bad = _as_int_term(st, v)
            return st.not_(st.eq(t, st.lit(0))), st.or_(v.null, bad)
        raise EncodeError(f"cannot encode predicate {type(p).__name__} in group context")

    def _aggregate(self, members: list[tuple[Term, tuple[SymValue, ...]]], e: q.Agg) -> SymValue:
        st = self.st
        if e.func == q.AggFunc.COUNT and e.arg is None:
            total = st.sum_([st.ite(m, st.lit(1), st.lit(0)) for m, _ in members])
            return SymValue(ET.INT, st.FALSE, total)
        vals = [(m, self.expr(row, e.arg)) for m, row in members]
        present = [(st.and_(m, st.not_(v.null)), v) for m, v in vals]
        if e.distinct:
            firsts = []
            for i, (g, v) in enumerate(present):
                dup = st.FALSE
                for g2, v2 in present[:i]:
                    dup = st.or_(dup, st.and_(g2, _payload_eq(st, v, v2)))
                firsts.append((st.and_(g, st.not_(dup)), v))
            present = firsts
        count = st.sum_([st.ite(g, st.lit(1), st.lit(0)) for g, _ in present])
        if e.func == q.AggFunc.COUNT:
            return SymValue(ET.INT, st.FALSE, count)
        empty = st.eq(count, st.lit(0))
        if e.func in (q.AggFunc.MIN, q.AggFunc.MAX):
            return self._fold_minmax(present, e.func == q.AggFunc.MIN, e.arg.type)
        ints = [(g, _as_int_term(st, v)[0]) for g, v in present]
        total = st.sum_([st.ite(g, t, st.lit(0)) for g, t in ints])
        if e.func == q.AggFunc.SUM:
            return SymValue(ET.INT, empty, total)
        return SymValue(ET.INT, empty, st.fdiv(total, st.ite(empty, st.lit(1), count)))

    def _fold_minmax(self, present: list[tuple[Term, SymValue]], is_min: bool, kind: ET) -> SymValue:
        st = self.st
        acc = _null_value(st, kind)
        for g, v in present:
            if kind == ET.DATE:
                better = _triple_cmp(st, "<" if is_min else ">", v.payload, acc.payload)
            else:
                better = _int_cmp(st, "<" if is_min else ">", v.payload, acc.payload)
            take = st.and_(g, st.or_(acc.null, better))
            acc = _merge(st, take, SymValue(kind, st.FALSE, v.payload), acc, kind)
        return acc

    # -- queries ----------------------------------------------------------------

    def query(self, node: q.QueryAst) -> EncodingResult:
        st = self.st
        rel, cons = self._query(node)
        return EncodingResult(rel, st.and_(*cons) if cons else st.TRUE)

    def _check_ceiling(self, n: int):
        if n > self.ctx.output_ceiling:
            raise BoundOverflow(
                f"derived output needs {n} symbolic tuples (ceiling {self.ctx.output_ceiling})"
            )

    def _query(self, node: q.QueryAst) -> tuple[SymRelation, list[Term]]:
        st = self.st
        if isinstance(node, q.RelationRef):
            hit = self._cte.get(node.name.lower())
            if hit is not None:
                return hit, []
            rel = self.ctx.relations.get(node.name.lower())
            if rel is None:
                raise EncodeError(f"no relation {node.name!r} in context")
            return rel, []
        if isinstance(node, q.Rename):
            return self._query(node.sub)
        if isinstance(node, q.Projection):
            rel, cons = self._query(node.sub)
            out = tuple(
                SymTuple(
                    tuple(self.expr(t.values, a.expr) for a in node.attrs), t.deleted
                )
                for t in rel.tuples
            )
            return SymRelation(out), cons
        if isinstance(node, q.Filter):
            rel, cons = self._query(node.sub)
            out = tuple(
                SymTuple(
                    t.values,
                    st.or_(t.deleted, st.not_(self.pred(t.values, node.pred))),
                )
                for t in rel.tuples
            )
            return SymRelation(out), cons
        if isinstance(node, q.Join):
            return self._join(node)
        if isinstance(node, q.Distinct):
            rel, cons = self._query(node.sub)
            return _dedupe_rel(st, rel), cons
        if isinstance(node, q.CollectionOp):
            return self._setop(node)
        if isinstance(node, q.GroupBy):
            return self._group_by(node)
        if isinstance(node, q.OrderBy):
            return self._order_by(node)
        if isinstance(node, q.With):
            saved = dict(self._cte)
            cons: list[Term] = []
            for name, d in zip(node.names, node.defs):
                rel, c = self._query(d)
                cons.extend(c)
                self._cte[name.lower()] = rel
            rel, c = self._query(node.body)
            cons.extend(c)
            self._cte = saved
            return rel, cons
        raise EncodeError(f"cannot encode {type(node).__name__}")

    def _join(self, node: q.Join) -> tuple[SymRelation, list[Term]]:
        st = self.st
        left, lc = self._query(node.left)
        right, rc = self._query(node.right)
        cons = lc + rc
        n = len(left.tuples) * len(right.tuples)
        if node.kind in (q.JoinKind.LEFT, q.JoinKind.FULL):
            n += len(left.tuples)
        if node.kind in (q.JoinKind.RIGHT, q.JoinKind.FULL):
            n += len(right.tuples)
        self._check_ceiling(n)
        out = []
        lmatch = [st.FALSE for _ in left.tuples]
        rmatch = [st.FALSE for _ in right.tuples]
        for i, lt_ in enumerate(left.tuples):
            for j, rt_ in enumerate(right.tuples):
                vals = lt_.values + rt_.values
                if node.kind == q.JoinKind.CROSS or node.on is None:
                    on = st.TRUE
                else:
                    on = self.pred(vals, node.on)
                pair_live = st.and_(
                    st.not_(lt_.deleted), st.not_(rt_.deleted), on
                )
                out.append(SymTuple(vals, st.not_(pair_live)))
                lmatch[i] = st.or_(lmatch[i], pair_live)
                rmatch[j] = st.or_(rmatch[j], pair_live)
        if node.kind in (q.JoinKind.LEFT, q.JoinKind.FULL):
            pad = tuple(_null_value(st, c.type) for c in node.right.out_cols)
            for i, lt_ in enumerate(left.tuples):
                live = st.and_(st.not_(lt_.deleted), st.not_(lmatch[i]))
                out.append(SymTuple(lt_.values + pad, st.not_(live)))
        if node.kind in (q.JoinKind.RIGHT, q.JoinKind.FULL):
            pad = tuple(_null_value(st, c.type) for c in node.left.out_cols)
            for j, rt_ in enumerate(right.tuples):
                live = st.and_(st.not_(rt_.deleted), st.not_(rmatch[j]))
                out.append(SymTuple(pad + rt_.values, st.not_(live)))
        return SymRelation(tuple(out)), cons

    def _setop(self, node: q.CollectionOp) -> tuple[SymRelation, list[Term]]:
        st = self.st
        left, lc = self._query(node.left)
        right, rc = self._query(node.right)
        cons = lc + rc
        if node.kind == q.SetOpKind.UNION_ALL:
            self._check_ceiling(len(left.tuples) + len(right.tuples))
            return SymRelation(left.tuples + right.tuples), cons
        if node.kind == q.SetOpKind.UNION:
            self._check_ceiling(len(left.tuples) + len(right.tuples))
            return _dedupe_rel(st, SymRelation(left.tuples + right.tuples)), cons
        deduped = _dedupe_rel(st, left)
        out = []
        for t in deduped.tuples:
            hit = st.FALSE
            for r in right.tuples:
                hit = st.or_(hit, st.and_(st.not_(r.deleted), _roweq(st, t, r)))
            if node.kind == q.SetOpKind.INTERSECT:
                out.append(SymTuple(t.values, st.or_(t.deleted, st.not_(hit))))
            else:
                out.append(SymTuple(t.values, st.or_(t.deleted, hit)))
        return SymRelation(tuple(out)), cons

    def _group_by(self, node: q.GroupBy) -> tuple[SymRelation, list[Term]]:
        st = self.st
        rel, cons = self._query(node.sub)
        if not node.keys:
            members = [(st.not_(t.deleted), t.values) for t in rel.tuples]
            vals, having_del = self._group_out(node, (), members)
            return SymRelation((SymTuple(vals, having_del),)), cons
        key_rows = [
            tuple(self.expr(t.values, k) for k in node.keys) for t in rel.tuples
        ]
        out = []
        for i, t in enumerate(rel.tuples):
            dup = st.FALSE
            for j in range(i):
                same = st.and_(*[
                    _identity_eq(st, key_rows[i][c], key_rows[j][c])
                    for c in range(len(node.keys))
                ]) if node.keys else st.TRUE
                dup = st.or_(dup, st.and_(st.not_(rel.tuples[j].deleted), same))
            rep = st.and_(st.not_(t.deleted), st.not_(dup))
            members = []
            for j, t2 in enumerate(rel.tuples):
                same = st.and_(*[
                    _identity_eq(st, key_rows[i][c], key_rows[j][c])
                    for c in range(len(node.keys))
                ])
                members.append((st.and_(st.not_(t2.deleted), same), t2.values))
            vals, having_del = self._group_out(node, key_rows[i], members)
            out.append(SymTuple(vals, st.or_(st.not_(rep), having_del)))
        return SymRelation(tuple(out)), cons

    def _group_out(self, node: q.GroupBy, keys, members) -> tuple[tuple[SymValue, ...], Term]:
        st = self.st
        vals = tuple(self.group_expr(keys, members, a.expr) for a in node.attrs)
        if node.having is None:
            return vals, st.FALSE
        t, n = self.group_pred3(keys, members, node.having)
        return vals, st.not_(st.and_(t, st.not_(n)))

    def _order_by(self, node: q.OrderBy) -> tuple[SymRelation, list[Term]]:
        st = self.st
        rel, cons = self._query(node.sub)
        if node.limit is None or node.limit < 0:
            return rel, cons  # pure reordering is invisible to set semantics
        self.ctx.nondeterministic = True
        n = node.limit
        m = len(rel.tuples)
        sels = [st.fresh(f"sel!{id(node)}!{j}", BOOL) for j in range(m)]
        self.ctx.sel_vars.extend(sels)
        for j, t in enumerate(rel.tuples):
            cons = cons + [st.implies(sels[j], st.not_(t.deleted))]
        live_count = st.sum_(
            [st.ite(st.not_(t.deleted), st.lit(1), st.lit(0)) for t in rel.tuples]
        )
        sel_count = st.sum_([st.ite(s, st.lit(1), st.lit(0)) for s in sels])
        want = st.ite(st.le(live_count, st.lit(n)), live_count, st.lit(n))
        cons = cons + [st.eq(sel_count, want)]
        # Selected rows must precede unselected live rows in key order; ties
        # are left free on purpose — the validation phase owns tie-breaking.
        for j in range(m):
            for l in range(m):
                if j == l:
                    continue
                cond = st.and_(
                    sels[j], st.not_(sels[l]), st.not_(rel.tuples[l].deleted)
                )
                cons = cons + [
                    st.implies(cond, self._key_le(rel.tuples[j], rel.tuples[l], node))
                ]
        out = tuple(
            SymTuple(t.values, st.or_(t.deleted, st.not_(sels[j])))
            for j, t in enumerate(rel.tuples)
        )
        return SymRelation(out), cons

    def _key_le(self, a: SymTuple, b: SymTuple, node: q.OrderBy) -> Term:
        st = self.st
        if not node.key_indices:
            return st.TRUE
        res = st.TRUE
        for idx in reversed(node.key_indices):
            va, vb = a.values[idx], b.values[idx]
            lt_ = _value_lt(st, va, vb) if node.ascending else _value_lt(st, vb, va)
            eq = _identity_eq(st, va, vb)
            res = st.or_(lt_, st.and_(eq, res))
        return res


# ---------------------------------------------------------------------------
# Shared term-building helpers


def _int_cmp(st: Store, op: str, a: Term, b: Term) -> Term:
    if op == "=":
        return st.eq(a, b)
    if op == "!=":
        return st.not_(st.eq(a, b))
    if op == "<":
        return st.lt(a, b)
    if op == "<=":
        return st.le(a, b)
    if op == ">":
        return st.lt(b, a)
    return st.le(b, a)


def _triple_cmp(st: Store, op: str, a: DateTriple, b: DateTriple) -> Term:
    if op == "=":
        return st.and_(st.eq(a.y, b.y), st.eq(a.m, b.m), st.eq(a.d, b.d))
    if op == "!=":
        return st.not_(_triple_cmp(st, "=", a, b))
    if op in (">", ">="):
        return _triple_cmp(st, "<" if op == ">" else "<=", b, a)
    strict = op == "<"
    lt_d = st.lt(a.d, b.d) if strict else st.le(a.d, b.d)
    lt_m = st.or_(st.lt(a.m, b.m), st.and_(st.eq(a.m, b.m), lt_d))
    return st.or_(st.lt(a.y, b.y), st.and_(st.eq(a.y, b.y), lt_m))


def _value_lt(st: Store, a: SymValue, b: SymValue) -> Term:
    """Sort-order less-than with Null smallest (null-identity, 2-valued)."""
    if a.kind == ET.DATE and b.kind == ET.DATE:
        base = _triple_cmp(st, "<", a.payload, b.payload)
    elif ET.DATE in (a.kind, b.kind) or ET.JULIAN in (a.kind, b.kind):
        at, _ = (
            _julian_term(st, a)
            if ET.JULIAN in (a.kind, b.kind)
            else _as_int_term(st, a)
        )
        bt, _ = (
            _julian_term(st, b)
            if ET.JULIAN in (a.kind, b.kind)
            else _as_int_term(st, b)
        )
        base = st.lt(at, bt)
    else:
        base = st.lt(a.payload, b.payload)
    return st.or_(
        st.and_(a.null, st.not_(b.null)),
        st.and_(st.not_(a.null), st.not_(b.null), base),
    )


def _merge(st: Store, c: Term, a: SymValue, b: SymValue, kind: ET) -> SymValue:
    null = st.ite(c, a.null, b.null)
    if a.kind == b.kind == ET.DATE:
        pa, pb = a.payload, b.payload
        return SymValue(
            ET.DATE,
            null,
            DateTriple(st.ite(c, pa.y, pb.y), st.ite(c, pa.m, pb.m), st.ite(c, pa.d, pb.d)),
        )
    if a.kind == b.kind:
        return SymValue(a.kind, null, st.ite(c, a.payload, b.payload))
    # Mixed-kind branches collapse through the int image (static result kind
    # is already INT in that case).
    at, an = _as_int_term(st, a)
    bt, bn = _as_int_term(st, b)
    return SymValue(ET.INT, st.or_(null, st.ite(c, an, bn)), st.ite(c, at, bt))


def _pred_leaves(p: q.Pred, cls: type) -> list[q.Pred]:
    # Conjunction/disjunction is associative-commutative; flattening the
    # spine keeps the lowered terms independent of how the source text
    # happened to order and nest the clauses.
    if isinstance(p, cls):
        return _pred_leaves(p.left, cls) + _pred_leaves(p.right, cls)
    return [p]


def _and3(st: Store, pairs) -> tuple[Term, Term]:
    t = st.and_(*[x for ti, ni in pairs for x in (ti, st.not_(ni))])
    f = st.or_(*[st.and_(st.not_(ti), st.not_(ni)) for ti, ni in pairs])
    return t, st.and_(st.not_(t), st.not_(f))


def _or3(st: Store, pairs) -> tuple[Term, Term]:
    t = st.or_(*[st.and_(ti, st.not_(ni)) for ti, ni in pairs])
    f = st.and_(*[x for ti, ni in pairs for x in (st.not_(ti), st.not_(ni))])
    return t, st.and_(st.not_(t), st.not_(f))


def _fold_or3(st: Store, pairs: list[tuple[Term, Term]]) -> tuple[Term, Term]:
    t = st.or_(*[st.and_(ti, st.not_(ni)) for ti, ni in pairs]) if pairs else st.FALSE
    anynull = st.or_(*[ni for _, ni in pairs]) if pairs else st.FALSE
    return t, st.and_(st.not_(t), anynull)


def _julian_scaled_operand(st: Store, v: SymValue) -> tuple[Term, Term]:
    if v.kind == ET.JULIAN:
        return v.payload, st.FALSE
    t, bad = _as_int_term(st, v)
    return st.mul(st.lit(2), t), bad


def _roweq(st: Store, a: SymTuple, b: SymTuple) -> Term:
    if len(a.values) != len(b.values):
        raise ArityMismatch(f"{len(a.values)} vs {len(b.values)}")
    return st.and_(*[
        _identity_eq(st, va, vb) for va, vb in zip(a.values, b.values)
    ]) if a.values else st.TRUE


def _dedupe_rel(st: Store, rel: SymRelation) -> SymRelation:
    out = []
    for i, t in enumerate(rel.tuples):
        dup = st.FALSE
        for j in range(i):
            dup = st.or_(
                dup,
                st.and_(st.not_(rel.tuples[j].deleted), _roweq(st, t, rel.tuples[j])),
            )
        out.append(SymTuple(t.values, st.or_(t.deleted, dup)))
    return SymRelation(tuple(out), dedupe_of=rel)


def _group_children(e: q.Expr) -> tuple[q.Expr, ...]:
    if isinstance(e, q.SubStr):
        return (e.subject, e.start, e.length)
    if isinstance(e, (q.Strftime, q.JulianDay, q.ToInt, q.ToStr, q.ToDate)):
        return (e.arg,)
    raise EncodeError(f"no group children for {type(e).__name__}")


def _rewrite_children(e: q.Expr, cols: list[q.Col]) -> q.Expr:
    if isinstance(e, q.SubStr):
        return q.SubStr(cols[0], cols[1], cols[2])
    if isinstance(e, q.Strftime):
        return q.Strftime(e.fmt, cols[0])
    if isinstance(e, q.JulianDay):
        return q.JulianDay(cols[0])
    if isinstance(e, q.ToInt):
        return q.ToInt(cols[0])
    if isinstance(e, q.ToStr):
        return q.ToStr(cols[0])
    return q.ToDate(cols[0])


# ---------------------------------------------------------------------------
# Public operations


def encode_expr(ctx: SymDb, tuples, e: q.Expr) -> SymValue:
    row = _flatten(tuples)
    return _Encoder(ctx).expr(row, e)


def encode_pred(ctx: SymDb, tuples, p: q.Pred) -> Term:
    row = _flatten(tuples)
    return _Encoder(ctx).pred(row, p)


def _flatten(tuples) -> tuple[SymValue, ...]:
    row: list[SymValue] = []
    for t in tuples:
        if isinstance(t, SymTuple):
            row.extend(t.values)
        else:
            row.append(t)
    return tuple(row)


def encode_query(ctx: SymDb, node: q.QueryAst) -> EncodingResult:
    return _Encoder(ctx).query(node)


def set_equiv_constraint(r1: SymRelation, r2: SymRelation) -> Term:
    if not r1.tuples and not r2.tuples:
        raise ArityMismatch("cannot compare two empty symbolic relations")
    if r1.tuples and r2.tuples and len(r1.tuples[0].values) != len(r2.tuples[0].values):
        raise ArityMismatch(
            f"{len(r1.tuples[0].values)} vs {len(r2.tuples[0].values)}"
        )
    some = (r1.tuples or r2.tuples)[0]
    st = some.deleted.store
    # Duplicate elimination never changes a row *set*, so two relations that
    # agree term-for-term once dedupe layers are stripped are equal outright.
    if _same_rel(_dedupe_base(r1), _dedupe_base(r2)):
        return st.TRUE
    return st.and_(_contained(st, r1, r2), _contained(st, r2, r1))


def _dedupe_base(r: SymRelation) -> SymRelation:
    while r.dedupe_of is not None:
        r = r.dedupe_of
    return r


def _same_rel(a: SymRelation, b: SymRelation) -> bool:
    if len(a.tuples) != len(b.tuples):
        return False
    for ta, tb in zip(a.tuples, b.tuples):
        if ta.deleted.tid != tb.deleted.tid or len(ta.values) != len(tb.values):
            return False
        for va, vb in zip(ta.values, tb.values):
            if va.kind != vb.kind or va.null.tid != vb.null.tid:
                return False
            pa, pb = va.payload, vb.payload
            if isinstance(pa, DateTriple) != isinstance(pb, DateTriple):
                return False
            if isinstance(pa, DateTriple):
                if (pa.y.tid, pa.m.tid, pa.d.tid) != (pb.y.tid, pb.m.tid, pb.d.tid):
                    return False
            elif pa.tid != pb.tid:
                return False
    return True


def _contained(st: Store, a: SymRelation, b: SymRelation) -> Term:
    parts = []
    for t in a.tuples:
        hit = st.or_(*[
            st.and_(st.not_(u.deleted), _roweq(st, t, u)) for u in b.tuples
        ]) if b.tuples else st.FALSE
        parts.append(st.implies(st.not_(t.deleted), hit))
    return st.and_(*parts) if parts else st.TRUE


def _all_null_nonempty(st: Store, r: SymRelation) -> Term:
    nonempty = st.or_(*[st.not_(t.deleted) for t in r.tuples])
    each = st.and_(*[
        st.implies(st.not_(t.deleted), st.and_(*[v.null for v in t.values]))
        for t in r.tuples
    ])
    return st.and_(nonempty, each)


def _empty(st: Store, r: SymRelation) -> Term:
    return st.and_(*[t.deleted for t in r.tuples])


@dataclass(frozen=True)
class EncodeOpts:
    exclude_degenerate: bool = False
    output_ceiling: int = DEFAULT_OUTPUT_CEILING
    # Caller-pinned candidate pools ({ExprType: values}): the search then runs
    # over exactly these values and exhaustion proves unsatisfiability *over
    # them* — the agreement mode used when differencing against brute force.
    pin_domains: dict | None = None


def referenced_tables(node: q.QueryAst, schema: DatabaseSchema) -> set[str]:
    """Lower-cased names of base tables either query operator tree reads,
    including through predicate subqueries. A CTE that shadows a base table
    name conservatively counts as a reference."""
    known = {t.name.lower() for t in schema.tables}
    out: set[str] = set()

    def walk_q(n):
        if isinstance(n, q.RelationRef):
            if n.name.lower() in known:
                out.add(n.name.lower())
            return
        if isinstance(n, (q.Rename, q.Distinct, q.OrderBy)):
            walk_q(n.sub)
        elif isinstance(n, q.Projection):
            walk_q(n.sub)
            for a in n.attrs:
                walk_e(a.expr)
        elif isinstance(n, q.Filter):
            walk_q(n.sub)
            walk_p(n.pred)
        elif isinstance(n, q.Join):
            walk_q(n.left)
            walk_q(n.right)
            if n.on is not None:
                walk_p(n.on)
        elif isinstance(n, q.CollectionOp):
            walk_q(n.left)
            walk_q(n.right)
        elif isinstance(n, q.GroupBy):
            walk_q(n.sub)
            for e in n.keys:
                walk_e(e)
            for a in n.attrs:
                walk_e(a.expr)
            if n.having is not None:
                walk_p(n.having)
        elif isinstance(n, q.With):
            for d in n.defs:
                walk_q(d)
            walk_q(n.body)

    def walk_p(p):
        if isinstance(p, q.Cmp):
            walk_e(p.left)
            walk_e(p.right)
        elif isinstance(p, (q.IsNull, q.Like, q.PrefixOf, q.SuffixOf)):
            walk_e(p.arg)
        elif isinstance(p, q.InList):
            walk_e(p.arg)
            for e in p.items:
                walk_e(e)
        elif isinstance(p, q.InSubquery):
            walk_e(p.arg)
            walk_q(p.sub)
        elif isinstance(p, (q.And, q.Or)):
            walk_p(p.left)
            walk_p(p.right)
        elif isinstance(p, q.Not):
            walk_p(p.arg)
        elif isinstance(p, q.ExprPred):
            walk_e(p.expr)

    def walk_e(e):
        if isinstance(e, q.Arith):
            walk_e(e.left)
            walk_e(e.right)
        elif isinstance(e, q.Ite):
            walk_p(e.cond)
            walk_e(e.then)
            walk_e(e.els)
        elif isinstance(e, q.Case):
            for w, r in e.whens:
                walk_p(w)
                walk_e(r)
            if e.els is not None:
                walk_e(e.els)
        elif isinstance(e, q.SubStr):
            walk_e(e.subject)
            walk_e(e.start)
            walk_e(e.length)
        elif isinstance(e, (q.Strftime, q.JulianDay, q.ToInt, q.ToStr, q.ToDate)):
            walk_e(e.arg)
        elif isinstance(e, q.PredExpr):
            walk_p(e.pred)
        elif isinstance(e, q.Agg):
            if e.arg is not None:
                walk_e(e.arg)

    walk_q(node)
    return out


@dataclass
class Formula:
    store: Store
    root: Term
    symdb: SymDb
    result1: SymRelation
    result2: SymRelation
    # Search metadata filled in by the domain analysis:
    search_plan: list = field(default_factory=list)
    complete: bool = True
    incomplete_why: str = ""
    nondeterministic: bool = False

    def to_smtlib(self) -> str:
        from .terms import to_smtlib

        return to_smtlib([self.root])


def nonequivalence_formula(
    schema: DatabaseSchema,
    q1: q.QueryAst,
    q2: q.QueryAst,
    k: int,
    opts: EncodeOpts = EncodeOpts(),
) -> Formula:
    used = referenced_tables(q1, schema) | referenced_tables(q2, schema)
    # A table neither query reads cannot influence either result: zero rows
    # there is equisatisfiable and shrinks the search.
    counts = {t.name.lower(): (k if t.name.lower() in used else 0) for t in schema.tables}
    symdb = alloc_symbolic_db(schema, k, counts)
    symdb.output_ceiling = opts.output_ceiling
    st = symdb.store
    enc = _Encoder(symdb)
    e1 = enc.query(q1)
    e2 = enc.query(q2)
    parts = list(symdb.constraints)
    parts.append(e1.constraints)
    parts.append(e2.constraints)
    parts.extend(symdb.aux_constraints)
    parts.append(st.not_(set_equiv_constraint(e1.result, e2.result)))
    if opts.exclude_degenerate:
        degenerate = st.or_(
            st.and_(_empty(st, e1.result), _all_null_nonempty(st, e2.result)),
            st.and_(_empty(st, e2.result), _all_null_nonempty(st, e1.result)),
        )
        parts.append(st.not_(degenerate))
    root = st.and_(*parts)
    f = Formula(
        store=st,
        root=root,
        symdb=symdb,
        result1=e1.result,
        result2=e2.result,
        nondeterministic=symdb.nondeterministic,
    )
    from .domains import analyze_domains

    analyze_domains(f, pin=opts.pin_domains)
    return f
