"""SQL parsing and name/type resolution.

parse_sql() turns SQL text into a fully resolved :mod:`sqleq.qast` tree over a
given schema. Anything outside the supported subset raises
``Unsupported`` rather than misparsing; malformed text raises
``SqlSyntaxError``; unknown tables/columns raise ``UnresolvedName``.

Documented desugarings (all semantics-preserving):
  - ``BETWEEN a AND b``  →  ``>= a AND <= b``;  ``NOT IN``/``NOT LIKE``  →  ``NOT (...)``
  - ``LIMIT n`` without ORDER BY  →  OrderBy node with an empty key list
  - ``SELECT *``  →  explicit column list in schema order
  - ORDER BY keys that are not in the select list become hidden trailing
    attributes, with a visible re-projection on top
  - 2-argument SUBSTR gets an effectively-infinite length argument
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

from . import qast as q
from .schema import DatabaseSchema, SqlType
from .values import Value

_HUGE_LEN = 1_000_000

_TYPE_TO_EXPR = {
    SqlType.INT: q.ExprType.INT,
    SqlType.STR: q.ExprType.STR,
    SqlType.DATE: q.ExprType.DATE,
}


class ParseError(Exception):
    def __init__(self, reason: str, pos: int = -1):
        super().__init__(f"{reason}" + (f" (at offset {pos})" if pos >= 0 else ""))
        self.reason = reason
        self.pos = pos


class SqlSyntaxError(ParseError):
    pass


class Unsupported(ParseError):
    pass


class UnresolvedName(ParseError):
    pass


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[0-9]+(?:\.[0-9]+)?)
  | (?P<str>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><>|!=|<=|>=|=|<|>|\(|\)|,|\.|\*|\+|-|/|%|\|\|)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | str | ident | op | end
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise SqlSyntaxError(f"unexpected character {text[i]!r}", i)
        i = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        toks.append(Token(kind, m.group(), m.start()))
    toks.append(Token("end", "", len(text)))
    return toks


# ---------------------------------------------------------------------------
# Binding scopes

@dataclass(frozen=True)
class ScopeEntry:
    alias: str  # lowercased table name or alias
    cols: tuple[q.OutCol, ...]
    base: int


class Scope:
    def __init__(self, entries: list[ScopeEntry]):
        self.entries = entries

    def resolve(self, table: str | None, name: str, pos: int) -> q.Col:
        low = name.lower()
        if table is not None:
            tlow = table.lower()
            for e in self.entries:
                if e.alias == tlow:
                    for i, c in enumerate(e.cols):
                        if c.name.lower() == low:
                            return q.Col(e.base + i, c.type, table, name)
                    raise UnresolvedName(f"no column {name!r} in {table!r}", pos)
            raise UnresolvedName(f"unknown table or alias {table!r}", pos)
        hits = []
        for e in self.entries:
            for i, c in enumerate(e.cols):
                if c.name.lower() == low:
                    hits.append(q.Col(e.base + i, c.type, None, name))
        if not hits:
            raise UnresolvedName(f"unknown column {name!r}", pos)
        if len(hits) > 1:
            raise UnresolvedName(f"ambiguous column {name!r}", pos)
        return hits[0]

    def all_cols(self, table: str | None = None) -> list[q.Col]:
        # Qualified, so a reprint of the expansion stays unambiguous.
        cols = []
        for e in self.entries:
            if table is not None and e.alias != table.lower():
                continue
            for i, c in enumerate(e.cols):
                cols.append(q.Col(e.base + i, c.type, e.alias, c.name))
        if table is not None and not cols:
            raise UnresolvedName(f"unknown table or alias {table!r}")
        return cols


_AGG_FUNCS = {f.value: f for f in q.AggFunc}
_KEYWORDS_STOPPING_ALIAS = {
    "where", "group", "having", "order", "limit", "on", "inner", "left",
    "right", "full", "cross", "join", "union", "intersect", "except", "as",
    "and", "or", "not", "offset",
}
# Words that end an expression but must never be read as an implicit alias.
_NOT_AN_ALIAS = _KEYWORDS_STOPPING_ALIAS | {
    "end", "when", "then", "else", "case", "null", "true", "false",
    "is", "in", "like", "between", "glob", "escape", "using", "select",
    "from", "by", "distinct", "asc", "desc", "all", "exists", "collate",
}


class Parser:
    """Recursive-descent parser; binds names against `schema` while parsing."""

    def __init__(self, text: str, schema: DatabaseSchema):
        self.text = text
        self.schema = schema
        self.toks = tokenize(text)
        self.i = 0
        self.ctes: dict[str, q.QueryAst] = {}

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "end":
            self.i += 1
        return t

    def at_kw(self, *words: str) -> bool:
        t = self.peek()
        return t.kind == "ident" and t.text.lower() in words

    def eat_kw(self, *words: str) -> bool:
        if self.at_kw(*words):
            self.next()
            return True
        return False

    def expect_kw(self, word: str) -> None:
        if not self.eat_kw(word):
            t = self.peek()
            raise SqlSyntaxError(f"expected {word.upper()}, found {t.text!r}", t.pos)

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "op" and t.text in ops

    def eat_op(self, *ops: str) -> bool:
        if self.at_op(*ops):
            self.next()
            return True
        return False

    def expect_op(self, op: str) -> None:
        if not self.eat_op(op):
            t = self.peek()
            raise SqlSyntaxError(f"expected {op!r}, found {t.text!r}", t.pos)

    # -- entry point --------------------------------------------------------

    def parse(self) -> q.QueryAst:
        node = self.parse_query()
        t = self.peek()
        if t.kind != "end" and not (t.kind == "op" and t.text == ";" ):
            raise SqlSyntaxError(f"trailing input {t.text!r}", t.pos)
        return node

    def parse_query(self) -> q.QueryAst:
        names: list[str] = []
        defs: list[q.QueryAst] = []
        if self.eat_kw("with"):
            while True:
                t = self.next()
                if t.kind != "ident":
                    raise SqlSyntaxError("expected CTE name", t.pos)
                name = t.text
                self.expect_kw("as")
                self.expect_op("(")
                d = self.parse_query()
                self.expect_op(")")
                self.ctes[name.lower()] = d
                names.append(name)
                defs.append(d)
                if not self.eat_op(","):
                    break
        body = self.parse_compound()
        if names:
            return q.With(tuple(names), tuple(defs), body, body.out_cols)
        return body

    def parse_compound(self) -> q.QueryAst:
        node = self.parse_select_core()
        while self.at_kw("union", "intersect", "except"):
            op = self.next().text.lower()
            if op == "union" and self.eat_kw("all"):
                kind = q.SetOpKind.UNION_ALL
            elif op == "union":
                kind = q.SetOpKind.UNION
            elif op == "intersect":
                kind = q.SetOpKind.INTERSECT
            else:
                kind = q.SetOpKind.EXCEPT
            rhs = self.parse_select_core()
            if len(node.out_cols) != len(rhs.out_cols):
                raise Unsupported("set operands with different arity")
            for a, b in zip(node.out_cols, rhs.out_cols):
                if a.type != b.type:
                    raise Unsupported("set operands with mismatched column types")
            node = q.CollectionOp(kind, node, rhs, node.out_cols)
        node = self.parse_order_limit(node)
        return node

    # -- SELECT core --------------------------------------------------------

    def parse_select_core(self) -> q.QueryAst:
        self.expect_kw("select")
        distinct = False
        if self.eat_kw("distinct"):
            distinct = True
        else:
            self.eat_kw("all")

        # Select items are parsed as raw token slices first: binding needs the
        # FROM scope, which comes later in the text.
        item_marks: list[tuple[int, int, str | None, str | None]] = []
        start = self.i
        while True:
            depth = 0
            seg_start = self.i
            star_table = None
            is_star = False
            if self.at_op("*"):
                self.next()
                is_star = True
            elif (
                self.peek().kind == "ident"
                and self.peek(1).kind == "op" and self.peek(1).text == "."
                and self.peek(2).kind == "op" and self.peek(2).text == "*"
            ):
                star_table = self.next().text
                self.next()
                self.next()
                is_star = True
            if not is_star:
                while True:
                    t = self.peek()
                    if t.kind == "end":
                        break
                    if t.kind == "op" and t.text == "(":
                        depth += 1
                    elif t.kind == "op" and t.text == ")":
                        if depth == 0:
                            break
                        depth -= 1
                    elif depth == 0 and t.kind == "op" and t.text == ",":
                        break
                    elif depth == 0 and t.kind == "ident" and t.text.lower() in (
                        "from", "where", "group", "having", "order", "limit",
                        "union", "intersect", "except",
                    ):
                        break
                    self.next()
                if self.i == seg_start:
                    raise SqlSyntaxError("empty select item", self.peek().pos)
            alias = None
            if is_star:
                item_marks.append((-1, -1, star_table or "*", None))
            else:
                # Split a trailing [AS] alias out of the slice.
                end = self.i
                j = end - 1
                if (
                    self.toks[j].kind == "ident"
                    and self.toks[j].text.lower() not in _KEYWORDS_STOPPING_ALIAS
                    and j - 1 >= seg_start
                    and self.toks[j - 1].kind == "ident"
                    and self.toks[j - 1].text.lower() == "as"
                ):
                    alias = self.toks[j].text
                    end = j - 1
                elif (
                    self.toks[j].kind == "ident"
                    and self.toks[j].text.lower() not in _NOT_AN_ALIAS
                    and j > seg_start
                    and (
                        self.toks[j - 1].kind in ("num", "str", "ident")
                        or (self.toks[j - 1].kind == "op" and self.toks[j - 1].text == ")")
                    )
                ):
                    # Implicit alias: a trailing bare identifier that cannot
                    # continue the expression before it.
                    alias = self.toks[j].text
                    end = j
                item_marks.append((seg_start, end, None, alias))
            if not self.eat_op(","):
                break
        if not item_marks:
            raise SqlSyntaxError("empty select list", self.peek().pos)

        if not self.eat_kw("from"):
            raise Unsupported("SELECT without FROM")
        node, scope = self.parse_from()

        if self.eat_kw("where"):
            pred = self.parse_pred(scope)
            if _contains_agg_pred(pred):
                raise Unsupported("aggregate in WHERE")
            node = q.Filter(node, pred, node.out_cols)

        group_keys: list[q.Expr] | None = None
        having_marks = None
        if self.eat_kw("group"):
            self.expect_kw("by")
            group_keys = []
            while True:
                group_keys.append(self.parse_expr(scope))
                if not self.eat_op(","):
                    break
            if self.eat_kw("having"):
                having_marks = self.parse_pred(scope, allow_agg=True)

        # Bind select items now the scope exists.
        attrs: list[q.Attr] = []
        used_names: set[str] = set()
        for seg_start, seg_end, star, alias in item_marks:
            if star is not None:
                cols = scope.all_cols(None if star == "*" else star)
                for c in cols:
                    attrs.append(q.Attr(c, _fresh_name(c.name, used_names)))
                continue
            save = self.i
            self.i = seg_start
            expr = self.parse_expr(scope, allow_agg=True)
            if self.i != seg_end:
                t = self.toks[self.i]
                raise SqlSyntaxError(f"unexpected {t.text!r} in select item", t.pos)
            self.i = save
            name = alias or (expr.name if isinstance(expr, q.Col) and expr.name else f"_c{len(attrs) + 1}")
            attrs.append(q.Attr(expr, _fresh_name(name, used_names)))

        has_agg = any(_contains_agg(a.expr) for a in attrs) or having_marks is not None
        if group_keys is not None or has_agg:
            keys = tuple(group_keys or ())
            gattrs, having = _bind_group_context(attrs, having_marks, keys)
            out = tuple(q.OutCol(a.name, a.expr.type) for a in gattrs)
            node = q.GroupBy(node, keys, tuple(gattrs), having, out, len(gattrs))
        else:
            out = tuple(q.OutCol(a.name, a.expr.type) for a in attrs)
            node = q.Projection(node, tuple(attrs), out, len(attrs))

        for oc in node.out_cols:
            if oc.type == q.ExprType.JULIAN:
                # Legal AST, but flagged by feature_scan: julian values are
                # internal and cannot appear in result rows.
                pass

        if distinct:
            node = q.Distinct(node, node.out_cols)
        return node

    # -- FROM / joins -------------------------------------------------------

    def parse_from(self) -> tuple[q.QueryAst, Scope]:
        node, entries = self.parse_join_chain()
        while self.eat_op(","):
            rhs, rentries = self.parse_join_chain()
            base = len(node.out_cols)
            entries = entries + [
                ScopeEntry(e.alias, e.cols, e.base + base) for e in rentries
            ]
            out = node.out_cols + rhs.out_cols
            node = q.Join(q.JoinKind.CROSS, node, rhs, None, out)
        return node, Scope(entries)

    def parse_join_chain(self) -> tuple[q.QueryAst, list[ScopeEntry]]:
        node, entries = self.parse_table_primary()
        while True:
            kind = None
            if self.at_kw("join") or self.at_kw("inner"):
                self.eat_kw("inner")
                self.expect_kw("join")
                kind = q.JoinKind.INNER
            elif self.at_kw("left"):
                self.next()
                self.eat_kw("outer")
                self.expect_kw("join")
                kind = q.JoinKind.LEFT
            elif self.at_kw("right"):
                self.next()
                self.eat_kw("outer")
                self.expect_kw("join")
                kind = q.JoinKind.RIGHT
            elif self.at_kw("full"):
                self.next()
                self.eat_kw("outer")
                self.expect_kw("join")
                kind = q.JoinKind.FULL
            elif self.at_kw("cross"):
                self.next()
                self.expect_kw("join")
                kind = q.JoinKind.CROSS
            else:
                break
            rhs, rentries = self.parse_table_primary()
            base = len(node.out_cols)
            entries = entries + [
                ScopeEntry(e.alias, e.cols, e.base + base) for e in rentries
            ]
            out = node.out_cols + rhs.out_cols
            on = None
            if self.eat_kw("on"):
                if kind == q.JoinKind.CROSS:
                    raise SqlSyntaxError("CROSS JOIN takes no ON clause", self.peek().pos)
                on = self.parse_pred(Scope(entries))
            elif kind != q.JoinKind.CROSS:
                raise Unsupported("JOIN without ON clause")
            if self.at_kw("using"):
                raise Unsupported("JOIN USING")
            node = q.Join(kind, node, rhs, on, out)
        return node, entries

    def parse_table_primary(self) -> tuple[q.QueryAst, list[ScopeEntry]]:
        if self.eat_op("("):
            sub = self.parse_query()
            self.expect_op(")")
            alias = self._parse_alias()
            if alias is None:
                raise SqlSyntaxError("subquery in FROM requires an alias", self.peek().pos)
            node = q.Rename(sub, alias, sub.out_cols)
            return node, [ScopeEntry(alias.lower(), sub.out_cols, 0)]
        t = self.next()
        if t.kind != "ident":
            raise SqlSyntaxError(f"expected table name, found {t.text!r}", t.pos)
        name = t.text
        cte = self.ctes.get(name.lower())
        if cte is not None:
            out = cte.out_cols
        else:
            table = self.schema.table(name)
            if table is None:
                raise UnresolvedName(f"unknown table {name!r}", t.pos)
            out = tuple(q.OutCol(c.name, _TYPE_TO_EXPR[c.type]) for c in table.columns)
        node: q.QueryAst = q.RelationRef(name, out)
        alias = self._parse_alias()
        if alias is not None:
            node = q.Rename(node, alias, out)
        return node, [ScopeEntry((alias or name).lower(), out, 0)]

    def _parse_alias(self) -> str | None:
        if self.eat_kw("as"):
            t = self.next()
            if t.kind != "ident":
                raise SqlSyntaxError("expected alias name", t.pos)
            return t.text
        t = self.peek()
        if t.kind == "ident" and t.text.lower() not in _KEYWORDS_STOPPING_ALIAS:
            self.next()
            return t.text
        return None

    # -- ORDER BY / LIMIT ---------------------------------------------------

    def parse_order_limit(self, node: q.QueryAst) -> q.QueryAst:
        keys: list[tuple[int, int]] = []  # token slices
        directions: list[bool] = []
        if self.eat_kw("order"):
            self.expect_kw("by")
            while True:
                seg_start = self.i
                depth = 0
                while True:
                    t = self.peek()
                    if t.kind == "end":
                        break
                    if t.kind == "op" and t.text == "(":
                        depth += 1
                    elif t.kind == "op" and t.text == ")":
                        if depth == 0:
                            break
                        depth -= 1
                    elif depth == 0 and (
                        (t.kind == "op" and t.text == ",")
                        or (t.kind == "ident" and t.text.lower() in ("asc", "desc", "limit"))
                    ):
                        break
                    self.next()
                if self.i == seg_start:
                    raise SqlSyntaxError("empty ORDER BY key", self.peek().pos)
                keys.append((seg_start, self.i))
                if self.eat_kw("asc"):
                    directions.append(True)
                elif self.eat_kw("desc"):
                    directions.append(False)
                else:
                    directions.append(True)
                if not self.eat_op(","):
                    break
            if len(set(directions)) > 1:
                raise Unsupported("mixed ASC/DESC directions in ORDER BY")
        limit = None
        if self.eat_kw("limit"):
            t = self.next()
            neg = t.kind == "op" and t.text == "-"
            if neg:
                t = self.next()
            if t.kind != "num" or "." in t.text:
                raise SqlSyntaxError("LIMIT requires an integer literal", t.pos)
            limit = -int(t.text) if neg else int(t.text)
            if self.at_kw("offset"):
                raise Unsupported("OFFSET")
            if self.eat_op(","):
                raise Unsupported("LIMIT with offset form")
        if not keys and limit is None:
            return node
        if not keys:
            return q.OrderBy(node, (), True, limit, node.out_cols)
        ascending = directions[0]
        return self._bind_order_keys(node, keys, ascending, limit)

    def _bind_order_keys(
        self,
        node: q.QueryAst,
        key_slices: list[tuple[int, int]],
        ascending: bool,
        limit: int | None,
    ) -> q.QueryAst:
        indices: list[int] = []
        pending: list[tuple[int, int]] = []
        out = node.out_cols
        for seg_start, seg_end in key_slices:
            idx = self._match_output_key(node, seg_start, seg_end)
            if idx is not None:
                indices.append(idx)
            else:
                indices.append(-1 - len(pending))
                pending.append((seg_start, seg_end))
        if pending:
            node, extra_base = self._extend_with_hidden(node, pending)
            indices = [
                i if i >= 0 else extra_base + (-1 - i)
                for i in indices
            ]
            ordered = q.OrderBy(node, tuple(indices), ascending, limit, node.out_cols)
            vis = node.out_cols[:extra_base]
            attrs = tuple(
                q.Attr(q.Col(i, c.type, None, c.name), c.name) for i, c in enumerate(vis)
            )
            return q.Projection(ordered, attrs, vis, len(vis))
        return q.OrderBy(node, tuple(indices), ascending, limit, out)

    def _match_output_key(self, node: q.QueryAst, seg_start: int, seg_end: int) -> int | None:
        toks = self.toks[seg_start:seg_end]
        out = node.out_cols
        # Ordinal.
        if len(toks) == 1 and toks[0].kind == "num" and "." not in toks[0].text:
            n = int(toks[0].text)
            if not (1 <= n <= len(out)):
                raise SqlSyntaxError(f"ORDER BY ordinal {n} out of range", toks[0].pos)
            return n - 1
        # Output-column name (select alias or projected column name).
        if len(toks) == 1 and toks[0].kind == "ident":
            low = toks[0].text.lower()
            for i, c in enumerate(out):
                if c.name.lower() == low:
                    return i
        # Structural match against projected attribute expressions.
        proj = _projection_like(node)
        if proj is not None:
            scope = self._scope_of_projection(proj)
            if scope is not None:
                expr = self._parse_slice_expr(seg_start, seg_end, scope, allow_agg=True)
                bound = _strip(
                    _bind_group_expr(expr, proj.keys)
                    if isinstance(proj, q.GroupBy)
                    else expr
                )
                for i, a in enumerate(proj.attrs):
                    if _strip(a.expr) == bound:
                        return i
        return None

    def _extend_with_hidden(
        self, node: q.QueryAst, pending: list[tuple[int, int]]
    ) -> tuple[q.QueryAst, int]:
        proj = _projection_like(node)
        if proj is None or proj is not node:
            # DISTINCT or a set operation on top: hidden keys would change the
            # row set being deduplicated.
            raise Unsupported("ORDER BY key not in the result of this query form")
        scope = self._scope_of_projection(proj)
        if scope is None:
            raise Unsupported("ORDER BY key not in the result of this query form")
        used = {c.name.lower() for c in proj.out_cols}
        extra_attrs = []
        for seg_start, seg_end in pending:
            expr = self._parse_slice_expr(seg_start, seg_end, scope, allow_agg=True)
            if isinstance(proj, q.GroupBy):
                expr = _bind_group_expr(expr, proj.keys)
            extra_attrs.append(q.Attr(expr, _fresh_name("_ord", used)))
        base = len(proj.attrs)
        attrs = proj.attrs + tuple(extra_attrs)
        out = proj.out_cols + tuple(q.OutCol(a.name, a.expr.type) for a in extra_attrs)
        if isinstance(proj, q.GroupBy):
            node = q.GroupBy(proj.sub, proj.keys, attrs, proj.having, out, proj.n_visible)
        else:
            node = q.Projection(proj.sub, attrs, out, proj.n_visible)
        return node, base

    def _scope_of_projection(self, proj: q.QueryAst) -> Scope | None:
        sub = proj.sub
        entries: list[ScopeEntry] = []

        def collect(node: q.QueryAst, base: int) -> int | None:
            if isinstance(node, q.Rename):
                entries.append(ScopeEntry(node.name.lower(), node.out_cols, base))
                return base + len(node.out_cols)
            if isinstance(node, q.RelationRef):
                entries.append(ScopeEntry(node.name.lower(), node.out_cols, base))
                return base + len(node.out_cols)
            if isinstance(node, q.Filter):
                return collect(node.sub, base)
            if isinstance(node, q.Join):
                mid = collect(node.left, base)
                if mid is None:
                    return None
                return collect(node.right, mid)
            return None

        if collect(sub, 0) is None:
            return None
        return Scope(entries)

    def _parse_slice_expr(self, seg_start: int, seg_end: int, scope: Scope, allow_agg: bool) -> q.Expr:
        save = self.i
        self.i = seg_start
        expr = self.parse_expr(scope, allow_agg=allow_agg)
        if self.i != seg_end:
            t = self.toks[self.i]
            raise SqlSyntaxError(f"unexpected {t.text!r} in ORDER BY key", t.pos)
        self.i = save
        return expr

    # -- predicates ---------------------------------------------------------

    def parse_pred(self, scope: Scope, allow_agg: bool = False) -> q.Pred:
        return self._parse_or(scope, allow_agg)

    def _parse_or(self, scope: Scope, allow_agg: bool) -> q.Pred:
        node = self._parse_and(scope, allow_agg)
        while self.eat_kw("or"):
            node = q.Or(node, self._parse_and(scope, allow_agg))
        return node

    def _parse_and(self, scope: Scope, allow_agg: bool) -> q.Pred:
        node = self._parse_not(scope, allow_agg)
        while self.eat_kw("and"):
            node = q.And(node, self._parse_not(scope, allow_agg))
        return node

    def _parse_not(self, scope: Scope, allow_agg: bool) -> q.Pred:
        if self.eat_kw("not"):
            return q.Not(self._parse_not(scope, allow_agg))
        return self._parse_pred_atom(scope, allow_agg)

    def _parse_pred_atom(self, scope: Scope, allow_agg: bool) -> q.Pred:
        # A parenthesized predicate, unless the parenthesis turns out to be an
        # expression operand — then rewind and re-parse as a comparison.
        if self.at_op("("):
            if self.peek(1).kind == "ident" and self.peek(1).text.lower() in ("select", "with"):
                raise Unsupported("scalar subquery")
            save = self.i
            self.next()
            try:
                inner = self.parse_pred(scope, allow_agg)
                self.expect_op(")")
            except ParseError:
                self.i = save
            else:
                t = self.peek()
                starts_suffix = (
                    (t.kind == "op" and t.text in ("=", "!=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/", "%"))
                    or (t.kind == "ident" and t.text.lower() in ("is", "in", "like", "between"))
                )
                if not starts_suffix:
                    return inner
                self.i = save
        left = self.parse_expr(scope, allow_agg=allow_agg)
        negated = self.eat_kw("not")
        if self.at_op("=", "!=", "<>", "<", "<=", ">", ">="):
            if negated:
                raise SqlSyntaxError("NOT before comparison operator", self.peek().pos)
            op = self.next().text
            if op == "<>":
                op = "!="
            right = self.parse_expr(scope, allow_agg=allow_agg)
            return q.Cmp(op, left, right)
        if self.eat_kw("is"):
            if negated:
                raise SqlSyntaxError("NOT before IS", self.peek().pos)
            neg = self.eat_kw("not")
            if not self.eat_kw("null"):
                raise Unsupported("IS with non-NULL right side")
            node: q.Pred = q.IsNull(left)
            return q.Not(node) if neg else node
        if self.eat_kw("between"):
            lo = self.parse_expr(scope, allow_agg=allow_agg)
            self.expect_kw("and")
            hi = self.parse_expr(scope, allow_agg=allow_agg)
            node = q.And(q.Cmp(">=", left, lo), q.Cmp("<=", left, hi))
            return q.Not(node) if negated else node
        if self.eat_kw("in"):
            self.expect_op("(")
            if self.at_kw("select", "with"):
                sub = self.parse_query()
                self.expect_op(")")
                if len(sub.out_cols) != 1:
                    raise Unsupported("IN subquery with more than one column")
                node = q.InSubquery(left, sub)
            else:
                items = []
                while True:
                    items.append(self.parse_expr(scope))
                    if not self.eat_op(","):
                        break
                self.expect_op(")")
                node = q.InList(left, tuple(items))
            return q.Not(node) if negated else node
        if self.eat_kw("like"):
            t = self.next()
            if t.kind != "str":
                raise Unsupported("non-literal LIKE pattern")
            if self.at_kw("escape"):
                raise Unsupported("LIKE ESCAPE")
            node = q.Like(_unquote(t.text), left)
            return q.Not(node) if negated else node
        if self.eat_kw("glob", "regexp", "match"):
            raise Unsupported("GLOB/REGEXP/MATCH")
        if negated:
            raise SqlSyntaxError("dangling NOT", self.peek().pos)
        return q.ExprPred(left)

    # -- expressions --------------------------------------------------------

    def parse_expr(self, scope: Scope, allow_agg: bool = False) -> q.Expr:
        return self._parse_add(scope, allow_agg)

    def _parse_add(self, scope: Scope, allow_agg: bool) -> q.Expr:
        node = self._parse_mul(scope, allow_agg)
        while self.at_op("+", "-"):
            op = self.next().text
            right = self._parse_mul(scope, allow_agg)
            node = _make_arith(op, node, right)
        return node

    def _parse_mul(self, scope: Scope, allow_agg: bool) -> q.Expr:
        node = self._parse_unary(scope, allow_agg)
        while self.at_op("*", "/", "%"):
            op = self.next().text
            right = self._parse_unary(scope, allow_agg)
            node = _make_arith(op, node, right)
        return node

    def _parse_unary(self, scope: Scope, allow_agg: bool) -> q.Expr:
        if self.at_op("-"):
            self.next()
            inner = self._parse_unary(scope, allow_agg)
            if isinstance(inner, q.Lit) and isinstance(inner.value, int):
                return q.Lit(-inner.value, q.ExprType.INT)
            return _make_arith("-", q.Lit(0, q.ExprType.INT), inner)
        if self.at_op("+"):
            self.next()
            return self._parse_unary(scope, allow_agg)
        return self._parse_primary(scope, allow_agg)

    def _parse_primary(self, scope: Scope, allow_agg: bool) -> q.Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            if "." in t.text:
                raise Unsupported("real literal")
            return q.Lit(int(t.text), q.ExprType.INT)
        if t.kind == "str":
            self.next()
            return q.Lit(_unquote(t.text), q.ExprType.STR)
        if t.kind == "op" and t.text == "(":
            if self.peek(1).kind == "ident" and self.peek(1).text.lower() in ("select", "with"):
                raise Unsupported("scalar subquery")
            self.next()
            inner = self.parse_expr(scope, allow_agg)
            self.expect_op(")")
            return inner
        if t.kind == "op" and t.text == "||":
            raise Unsupported("string concatenation ||")
        if t.kind != "ident":
            raise SqlSyntaxError(f"unexpected {t.text!r}", t.pos)

        low = t.text.lower()
        if low == "null":
            self.next()
            return q.Lit(None, q.ExprType.INT)
        if low in ("true", "false"):
            self.next()
            return q.Lit(1 if low == "true" else 0, q.ExprType.INT)
        if low == "case":
            return self._parse_case(scope, allow_agg)
        if low == "cast":
            return self._parse_cast(scope, allow_agg)

        # Function call?
        if self.peek(1).kind == "op" and self.peek(1).text == "(":
            return self._parse_call(scope, allow_agg)

        # Column reference.
        self.next()
        if self.at_op(".") and self.peek(1).kind == "ident":
            self.next()
            name_tok = self.next()
            return scope.resolve(t.text, name_tok.text, name_tok.pos)
        return scope.resolve(None, t.text, t.pos)

    def _parse_call(self, scope: Scope, allow_agg: bool) -> q.Expr:
        t = self.next()
        fname = t.text.lower()
        self.expect_op("(")
        if fname in _AGG_FUNCS:
            if not allow_agg:
                raise Unsupported(f"aggregate {fname.upper()} in this position")
            func = _AGG_FUNCS[fname]
            distinct = self.eat_kw("distinct")
            if self.at_op("*"):
                self.next()
                self.expect_op(")")
                if func != q.AggFunc.COUNT:
                    raise SqlSyntaxError(f"{fname.upper()}(*) is not valid", t.pos)
                return q.Agg(func, None, distinct, q.ExprType.INT)
            arg = self.parse_expr(scope)
            self.expect_op(")")
            if _contains_agg(arg):
                raise Unsupported("nested aggregate")
            if func in (q.AggFunc.MIN, q.AggFunc.MAX):
                rtype = arg.type
            else:
                rtype = q.ExprType.INT
            if func in (q.AggFunc.SUM, q.AggFunc.AVG) and arg.type == q.ExprType.JULIAN:
                raise Unsupported("aggregating julian-day values")
            return q.Agg(func, arg, distinct, rtype)
        if fname in ("substr", "substring"):
            subject = self.parse_expr(scope, allow_agg)
            self.expect_op(",")
            start = self.parse_expr(scope, allow_agg)
            if self.eat_op(","):
                length = self.parse_expr(scope, allow_agg)
            else:
                length = q.Lit(_HUGE_LEN, q.ExprType.INT)
            self.expect_op(")")
            return q.SubStr(subject, start, length)
        if fname == "strftime":
            fmt_tok = self.next()
            if fmt_tok.kind != "str":
                raise Unsupported("non-literal STRFTIME format")
            fmt = _unquote(fmt_tok.text)
            if fmt == "%m":
                fmt = "%M"
            if fmt not in ("%Y", "%M", "%d"):
                raise Unsupported(f"STRFTIME format {fmt!r}")
            self.expect_op(",")
            arg = self.parse_expr(scope, allow_agg)
            self.expect_op(")")
            return q.Strftime(fmt, arg)
        if fname == "julianday":
            arg = self.parse_expr(scope, allow_agg)
            self.expect_op(")")
            return q.JulianDay(arg)
        if fname == "date":
            arg = self.parse_expr(scope, allow_agg)
            self.expect_op(")")
            return q.ToDate(arg)
        if fname == "iif":
            cond = self.parse_pred(scope, allow_agg)
            self.expect_op(",")
            then = self.parse_expr(scope, allow_agg)
            self.expect_op(",")
            els = self.parse_expr(scope, allow_agg)
            self.expect_op(")")
            ty = _merge_types(then.type, els.type)
            return q.Ite(cond, then, els, ty)
        raise Unsupported(f"function {fname.upper()}")

    def _parse_case(self, scope: Scope, allow_agg: bool) -> q.Expr:
        self.expect_kw("case")
        operand = None
        if not self.at_kw("when"):
            operand = self.parse_expr(scope, allow_agg)
        whens = []
        while self.eat_kw("when"):
            if operand is not None:
                v = self.parse_expr(scope, allow_agg)
                cond: q.Pred = q.Cmp("=", operand, v)
            else:
                cond = self.parse_pred(scope, allow_agg)
            self.expect_kw("then")
            res = self.parse_expr(scope, allow_agg)
            whens.append((cond, res))
        if not whens:
            raise SqlSyntaxError("CASE without WHEN", self.peek().pos)
        els = None
        if self.eat_kw("else"):
            els = self.parse_expr(scope, allow_agg)
        self.expect_kw("end")
        ty = whens[0][1].type
        for _, r in whens[1:]:
            ty = _merge_types(ty, r.type)
        if els is not None:
            ty = _merge_types(ty, els.type)
        return q.Case(tuple(whens), els, ty)

    def _parse_cast(self, scope: Scope, allow_agg: bool) -> q.Expr:
        self.expect_kw("cast")
        self.expect_op("(")
        arg = self.parse_expr(scope, allow_agg)
        self.expect_kw("as")
        t = self.next()
        if t.kind != "ident":
            raise SqlSyntaxError("expected type name in CAST", t.pos)
        kind = t.text.lower()
        self.expect_op(")")
        if kind in ("integer", "int"):
            return q.ToInt(arg)
        if kind == "text":
            return q.ToStr(arg)
        if kind == "date":
            return q.ToDate(arg)
        raise Unsupported(f"CAST to {kind.upper()}")


# ---------------------------------------------------------------------------
# Binding helpers


def _unquote(s: str) -> str:
    return s[1:-1].replace("''", "'")


def _strip(x):
    """Normalize away cosmetic fields (qualifiers, display names) so that
    structural comparison sees only positions and operators."""
    if isinstance(x, q.Col):
        return q.Col(x.index, x.type, None, "")
    if isinstance(x, q.GroupKeyRef):
        return q.GroupKeyRef(x.index, x.type, "")
    if isinstance(x, (q.Expr, q.Pred)) and dataclasses.is_dataclass(x):
        changes = {}
        for f in dataclasses.fields(x):
            v = getattr(x, f.name)
            if isinstance(v, (q.Expr, q.Pred)):
                changes[f.name] = _strip(v)
            elif isinstance(v, tuple) and v and isinstance(v[0], (q.Expr, q.Pred)):
                changes[f.name] = tuple(_strip(i) for i in v)
            elif isinstance(v, tuple) and v and isinstance(v[0], tuple):
                changes[f.name] = tuple(
                    tuple(_strip(j) for j in pair) for pair in v
                )
        return dataclasses.replace(x, **changes) if changes else x
    return x


def _fresh_name(base: str, used: set[str]) -> str:
    name = base
    n = 1
    while name.lower() in used:
        n += 1
        name = f"{base}_{n}"
    used.add(name.lower())
    return name


def _merge_types(a: q.ExprType, b: q.ExprType) -> q.ExprType:
    if a == b:
        return a
    if q.ExprType.JULIAN in (a, b):
        raise Unsupported("mixing julian-day values with other types")
    # Branches of differing type: the result is dynamically typed; INT is the
    # coercion pivot used by comparisons.
    return q.ExprType.INT


def _make_arith(op: str, left: q.Expr, right: q.Expr) -> q.Expr:
    lt, rt = left.type, right.type
    if q.ExprType.JULIAN in (lt, rt):
        if op not in ("+", "-"):
            raise Unsupported("julian-day values in multiplicative arithmetic")
        if {lt, rt} <= {q.ExprType.JULIAN, q.ExprType.INT}:
            return q.Arith(op, left, right, q.ExprType.JULIAN)
        raise Unsupported("julian-day arithmetic with non-integer operand")
    return q.Arith(op, left, right, q.ExprType.INT)


def _contains_agg(e: q.Expr) -> bool:
    if isinstance(e, q.Agg):
        return True
    if isinstance(e, q.Arith):
        return _contains_agg(e.left) or _contains_agg(e.right)
    if isinstance(e, q.Ite):
        return _contains_agg(e.then) or _contains_agg(e.els) or _contains_agg_pred(e.cond)
    if isinstance(e, q.Case):
        return any(_contains_agg(r) or _contains_agg_pred(c) for c, r in e.whens) or (
            e.els is not None and _contains_agg(e.els)
        )
    if isinstance(e, q.SubStr):
        return _contains_agg(e.subject) or _contains_agg(e.start) or _contains_agg(e.length)
    if isinstance(e, (q.Strftime, q.JulianDay, q.ToInt, q.ToDate, q.ToStr)):
        return _contains_agg(e.arg)
    if isinstance(e, q.PredExpr):
        return _contains_agg_pred(e.pred)
    return False


def _contains_agg_pred(p: q.Pred) -> bool:
    if isinstance(p, q.Cmp):
        return _contains_agg(p.left) or _contains_agg(p.right)
    if isinstance(p, (q.And, q.Or)):
        return _contains_agg_pred(p.left) or _contains_agg_pred(p.right)
    if isinstance(p, q.Not):
        return _contains_agg_pred(p.arg)
    if isinstance(p, q.IsNull):
        return _contains_agg(p.arg)
    if isinstance(p, q.InList):
        return _contains_agg(p.arg) or any(_contains_agg(i) for i in p.items)
    if isinstance(p, q.InSubquery):
        return _contains_agg(p.arg)
    if isinstance(p, (q.Like, q.PrefixOf, q.SuffixOf)):
        return _contains_agg(p.arg)
    if isinstance(p, q.ExprPred):
        return _contains_agg(p.expr)
    return False


def _bind_group_expr(e: q.Expr, keys: tuple[q.Expr, ...]) -> q.Expr:
    """Rewrite an expression into group context: grouped subexpressions become
    GroupKeyRef leaves; aggregate arguments stay in row context."""
    stripped = _strip(e)
    for i, k in enumerate(keys):
        if stripped == _strip(k):
            name = k.name if isinstance(k, q.Col) else ""
            return q.GroupKeyRef(i, e.type, name)
    if isinstance(e, q.Agg):
        return e
    if isinstance(e, q.Col):
        raise Unsupported(f"column {e.name!r} is neither grouped nor aggregated")
    if isinstance(e, q.Arith):
        return q.Arith(e.op, _bind_group_expr(e.left, keys), _bind_group_expr(e.right, keys), e.type)
    if isinstance(e, q.Ite):
        return q.Ite(
            _bind_group_pred(e.cond, keys),
            _bind_group_expr(e.then, keys),
            _bind_group_expr(e.els, keys),
            e.type,
        )
    if isinstance(e, q.Case):
        return q.Case(
            tuple((_bind_group_pred(c, keys), _bind_group_expr(r, keys)) for c, r in e.whens),
            None if e.els is None else _bind_group_expr(e.els, keys),
            e.type,
        )
    if isinstance(e, q.SubStr):
        return q.SubStr(
            _bind_group_expr(e.subject, keys),
            _bind_group_expr(e.start, keys),
            _bind_group_expr(e.length, keys),
        )
    if isinstance(e, q.Strftime):
        return q.Strftime(e.fmt, _bind_group_expr(e.arg, keys))
    if isinstance(e, q.JulianDay):
        return q.JulianDay(_bind_group_expr(e.arg, keys))
    if isinstance(e, q.ToInt):
        return q.ToInt(_bind_group_expr(e.arg, keys))
    if isinstance(e, q.ToDate):
        return q.ToDate(_bind_group_expr(e.arg, keys))
    if isinstance(e, q.ToStr):
        return q.ToStr(_bind_group_expr(e.arg, keys))
    if isinstance(e, q.PredExpr):
        return q.PredExpr(_bind_group_pred(e.pred, keys))
    return e


def _bind_group_pred(p: q.Pred, keys: tuple[q.Expr, ...]) -> q.Pred:
    if isinstance(p, q.Cmp):
        return q.Cmp(p.op, _bind_group_expr(p.left, keys), _bind_group_expr(p.right, keys))
    if isinstance(p, q.And):
        return q.And(_bind_group_pred(p.left, keys), _bind_group_pred(p.right, keys))
    if isinstance(p, q.Or):
        return q.Or(_bind_group_pred(p.left, keys), _bind_group_pred(p.right, keys))
    if isinstance(p, q.Not):
        return q.Not(_bind_group_pred(p.arg, keys))
    if isinstance(p, q.IsNull):
        return q.IsNull(_bind_group_expr(p.arg, keys))
    if isinstance(p, q.InList):
        return q.InList(
            _bind_group_expr(p.arg, keys),
            tuple(_bind_group_expr(i, keys) for i in p.items),
        )
    if isinstance(p, q.InSubquery):
        return q.InSubquery(_bind_group_expr(p.arg, keys), p.sub)
    if isinstance(p, q.Like):
        return q.Like(p.pattern, _bind_group_expr(p.arg, keys))
    if isinstance(p, q.PrefixOf):
        return q.PrefixOf(p.prefix, _bind_group_expr(p.arg, keys))
    if isinstance(p, q.SuffixOf):
        return q.SuffixOf(p.suffix, _bind_group_expr(p.arg, keys))
    if isinstance(p, q.ExprPred):
        return q.ExprPred(_bind_group_expr(p.expr, keys))
    return p


def _bind_group_context(
    attrs: list[q.Attr], having: q.Pred | None, keys: tuple[q.Expr, ...]
) -> tuple[list[q.Attr], q.Pred | None]:
    bound = [q.Attr(_bind_group_expr(a.expr, keys), a.name) for a in attrs]
    h = None if having is None else _bind_group_pred(having, keys)
    return bound, h


def _projection_like(node: q.QueryAst) -> q.QueryAst | None:
    """The Projection/GroupBy whose attrs define `node`'s output, if direct."""
    if isinstance(node, (q.Projection, q.GroupBy)):
        return node
    return None


# ---------------------------------------------------------------------------
# Public API


def parse_sql(text: str, schema: DatabaseSchema) -> q.QueryAst:
    text = text.rstrip()
    if text.endswith(";"):  # one optional statement terminator
        text = text[:-1]
    if not text.strip():
        raise SqlSyntaxError("empty query text", 0)
    return Parser(text, schema).parse()
