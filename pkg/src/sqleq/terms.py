"""Formula store: hash-consed first-order terms over int, string, and bool
sorts, with partial evaluation and SMT-LIB2 emission.

This layer has its own scalar semantics for every operator (string→int
parsing, substring arithmetic, LIKE matching, calendar arithmetic) and must
not import the interpreter's value helpers: the two implementations are
compared differentially in the test suite, which only means something if
they share no code.

Terms are immutable and interned per Store; structural identity is pointer
identity, so equal subformulas fold for free. Construction applies cheap
algebraic simplifications (constant folding, unit/absorbing elements,
``eq(x,x) → true``) — enough to collapse reflexive query pairs outright.

Partial evaluation maps a partial variable assignment to a value or INDET
("not yet determined"). Boolean connectives propagate knowns through INDET
(``and(false, INDET) = false``), which is what makes search pruning work.
"""

from __future__ import annotations

from typing import Any

INT = "Int"
STR = "Str"
BOOL = "Bool"


class Indet:
    __slots__ = ()

    def __repr__(self):
        return "INDET"


INDET = Indet()

# Ops whose value is fully determined by (op, args, payload) — everything
# except "var".
_ARITH = {"add", "sub", "mul", "fdiv", "fmod"}


class Term:
    __slots__ = ("store", "tid", "op", "args", "payload", "sort")

    def __init__(self, store, tid, op, args, payload, sort):
        self.store = store
        self.tid = tid
        self.op = op
        self.args = args
        self.payload = payload
        self.sort = sort

    def __repr__(self):
        if self.op == "lit":
            return f"Lit({self.payload!r})"
        if self.op == "var":
            return f"Var({self.payload}:{self.sort})"
        return f"{self.op}#{self.tid}({len(self.args)} args)"

    def __hash__(self):
        return self.tid

    def __eq__(self, other):
        return self is other


class Store:
    def __init__(self):
        self._intern: dict[tuple, Term] = {}
        self._next = 0
        self.vars: list[Term] = []
        self.julian_images: dict[int, tuple[Term, Term, Term]] = {}
        self.TRUE = self.lit(True)
        self.FALSE = self.lit(False)

    # -- construction -------------------------------------------------------

    def _mk(self, op: str, args: tuple[Term, ...], payload, sort: str) -> Term:
        # type(payload) is part of the key: False == 0 in Python, but the
        # Bool literal and the Int literal must stay distinct terms.
        key = (op, tuple(a.tid for a in args), payload, type(payload).__name__, sort)
        hit = self._intern.get(key)
        if hit is not None:
            return hit
        t = Term(self, self._next, op, args, payload, sort)
        self._next += 1
        self._intern[key] = t
        if op == "var":
            self.vars.append(t)
        return t

    def lit(self, v) -> Term:
        if isinstance(v, bool):
            return self._mk("lit", (), v, BOOL)
        if isinstance(v, int):
            return self._mk("lit", (), v, INT)
        if isinstance(v, str):
            return self._mk("lit", (), v, STR)
        raise TypeError(f"no literal of {type(v).__name__}")

    def fresh(self, name: str, sort: str) -> Term:
        return self._mk("var", (), (name, len(self.vars)), sort)

    # boolean structure

    def not_(self, a: Term) -> Term:
        if a.op == "lit":
            return self.lit(not a.payload)
        if a.op == "not":
            return a.args[0]
        return self._mk("not", (a,), None, BOOL)

    def and_(self, *parts: Term) -> Term:
        flat = []
        for p in parts:
            if p.op == "lit":
                if p.payload is False:
                    return self.FALSE
                continue
            if p.op == "and":
                flat.extend(p.args)
            else:
                flat.append(p)
        # Commutative: canonical arg order makes syntactically shuffled
        # conjunctions hash-cons to one node.
        uniq = sorted(dict.fromkeys(flat), key=lambda p: p.tid)
        tids = {p.tid for p in uniq}
        if any(p.op == "not" and p.args[0].tid in tids for p in uniq):
            return self.FALSE
        if not uniq:
            return self.TRUE
        if len(uniq) == 1:
            return uniq[0]
        return self._mk("and", tuple(uniq), None, BOOL)

    def or_(self, *parts: Term) -> Term:
        flat = []
        for p in parts:
            if p.op == "lit":
                if p.payload is True:
                    return self.TRUE
                continue
            if p.op == "or":
                flat.extend(p.args)
            else:
                flat.append(p)
        uniq = sorted(dict.fromkeys(flat), key=lambda p: p.tid)
        tids = {p.tid for p in uniq}
        if any(p.op == "not" and p.args[0].tid in tids for p in uniq):
            return self.TRUE
        if not uniq:
            return self.FALSE
        if len(uniq) == 1:
            return uniq[0]
        return self._mk("or", tuple(uniq), None, BOOL)

    def implies(self, a: Term, b: Term) -> Term:
        return self.or_(self.not_(a), b)

    def ite(self, c: Term, a: Term, b: Term) -> Term:
        if c.op == "lit":
            return a if c.payload else b
        if a is b:
            return a
        if a.sort == BOOL:
            return self.or_(self.and_(c, a), self.and_(self.not_(c), b))
        return self._mk("ite", (c, a, b), None, a.sort)

    # comparisons

    def eq(self, a: Term, b: Term) -> Term:
        if a is b:
            return self.TRUE
        if a.sort != b.sort:
            raise TypeError(f"eq across sorts {a.sort}/{b.sort}")
        if a.op == "lit" and b.op == "lit":
            return self.lit(a.payload == b.payload)
        if a.tid > b.tid:
            a, b = b, a
        return self._mk("eq", (a, b), None, BOOL)

    def lt(self, a: Term, b: Term) -> Term:
        if a is b:
            return self.FALSE
        if a.op == "lit" and b.op == "lit":
            return self.lit(a.payload < b.payload)
        return self._mk("lt", (a, b), None, BOOL)

    def le(self, a: Term, b: Term) -> Term:
        if a is b:
            return self.TRUE
        if a.op == "lit" and b.op == "lit":
            return self.lit(a.payload <= b.payload)
        return self._mk("le", (a, b), None, BOOL)

    # integer arithmetic

    def _arith2(self, op: str, a: Term, b: Term) -> Term:
        if a.op == "lit" and b.op == "lit":
            return self.lit(_arith_eval(op, a.payload, b.payload))
        if op in ("add", "sub") and b.op == "lit" and b.payload == 0:
            return a
        if op == "add" and a.op == "lit" and a.payload == 0:
            return b
        if op == "mul" and b.op == "lit" and b.payload == 1:
            return a
        if op == "mul" and a.op == "lit" and a.payload == 1:
            return b
        return self._mk(op, (a, b), None, INT)

    def add(self, a, b):
        return self._arith2("add", a, b)

    def sub(self, a, b):
        return self._arith2("sub", a, b)

    def mul(self, a, b):
        return self._arith2("mul", a, b)

    def fdiv(self, a, b):
        return self._arith2("fdiv", a, b)

    def fmod(self, a, b):
        return self._arith2("fmod", a, b)

    def sum_(self, parts: list[Term]) -> Term:
        acc = self.lit(0)
        for p in parts:
            acc = self.add(acc, p)
        return acc

    # string ops (independent semantics — see module docstring)

    def str_to_int(self, s: Term) -> Term:
        if s.op == "lit":
            return self.lit(_str2int(s.payload))
        return self._mk("str_to_int", (s,), None, INT)

    def int_to_str(self, v: Term) -> Term:
        if v.op == "lit":
            return self.lit(_int2str(v.payload))
        return self._mk("int_to_str", (v,), None, STR)

    def substr(self, s: Term, start: Term, length: Term) -> Term:
        if s.op == "lit" and start.op == "lit" and length.op == "lit":
            return self.lit(_substr(s.payload, start.payload, length.payload))
        return self._mk("substr", (s, start, length), None, STR)

    def concat(self, *parts: Term) -> Term:
        flat: list[Term] = []
        for p in parts:
            if p.op == "concat":
                flat.extend(p.args)
            else:
                flat.append(p)
        out: list[Term] = []
        for p in flat:
            if p.op == "lit" and p.payload == "":
                continue
            if out and p.op == "lit" and out[-1].op == "lit":
                out[-1] = self.lit(out[-1].payload + p.payload)
            else:
                out.append(p)
        if not out:
            return self.lit("")
        if len(out) == 1:
            return out[0]
        return self._mk("concat", tuple(out), None, STR)

    def like(self, pattern: str, s: Term) -> Term:
        if s.op == "lit":
            return self.lit(_like(pattern, s.payload))
        return self._mk("like", (s,), pattern, BOOL)

    def prefix_of(self, prefix: str, s: Term) -> Term:
        if s.op == "lit":
            return self.lit(s.payload[: len(prefix)] == prefix)
        return self._mk("prefix", (s,), prefix, BOOL)

    def suffix_of(self, suffix: str, s: Term) -> Term:
        if s.op == "lit":
            v = s.payload
            return self.lit(suffix == "" or v[-len(suffix):] == suffix)
        return self._mk("suffix", (s,), suffix, BOOL)

    # calendar shape ops

    def str_is_iso(self, s: Term) -> Term:
        if s.op == "lit":
            return self.lit(_iso_parts(s.payload) is not None)
        return self._mk("str_is_iso", (s,), None, BOOL)

    def str_iso_part(self, s: Term, part: int) -> Term:
        if s.op == "lit":
            p = _iso_parts(s.payload)
            return self.lit(0 if p is None else p[part])
        return self._mk("str_iso_part", (s,), part, INT)

    def days_in_month(self, y: Term, m: Term) -> Term:
        if y.op == "lit" and m.op == "lit":
            return self.lit(_dim(y.payload, m.payload))
        return self._mk("days_in_month", (y, m), None, INT)

    def julian_scaled(self, y: Term, m: Term, d: Term) -> Term:
        """Twice the julian day number of noon on (y, m, d), as pure integer
        arithmetic over the component terms."""
        two = self.lit(2)
        shift = self.le(m, self.lit(2))
        y2 = self.ite(shift, self.sub(y, self.lit(1)), y)
        m2 = self.ite(shift, self.add(m, self.lit(12)), m)
        c = self.sub(
            self.sub(two, self.fdiv(y2, self.lit(100))),
            self.sub(self.lit(0), self.fdiv(y2, self.lit(400))),
        )
        a1 = self.fdiv(self.mul(self.lit(36525), self.add(y2, self.lit(4716))), self.lit(100))
        a2 = self.fdiv(self.mul(self.lit(306001), self.add(m2, self.lit(1))), self.lit(10000))
        total = self.add(self.add(a1, a2), self.add(d, c))
        res = self.sub(self.mul(two, total), self.lit(3049))
        # Domain analysis treats the whole composite as a monotone image of
        # its date argument; the registry lets it recognize one.
        if res.op != "lit":
            self.julian_images[res.tid] = (y, m, d)
        return res


def _arith_eval(op: str, a: int, b: int) -> int:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    # Total floor division/modulo: divisor 0 yields 0 here; the encoder puts
    # the null-flag guard on the SymValue, never on the payload.
    if op == "fdiv":
        return 0 if b == 0 else a // b
    return 0 if b == 0 else a % b


def _str2int(s: str) -> int:
    i = 0
    neg = False
    if i < len(s) and s[i] == "-":
        neg = True
        i = 1
    if i >= len(s):
        return 0
    n = 0
    for ch in s[i:]:
        o = ord(ch)
        if o < 48 or o > 57:
            return 0
        n = n * 10 + (o - 48)
    return -n if neg else n


def _int2str(v: int) -> str:
    if v == 0:
        return "0"
    neg = v < 0
    v = -v if neg else v
    digits = []
    while v:
        digits.append(chr(48 + v % 10))
        v //= 10
    return ("-" if neg else "") + "".join(reversed(digits))


def _substr(s: str, start, length) -> str | None:
    if not isinstance(start, int) or not isinstance(length, int):
        return None
    n = len(s)
    if length <= 0:
        return ""
    if start > 0:
        v = start - 1
    elif start < 0:
        v = n + start
    else:
        v = -1
    end = v + length
    if end > n:
        end = n
    if v < 0:
        v = 0
    if end < 0:
        end = 0
    return s[v:end]


def _like(pattern: str, s: str) -> bool:
    # Backtracking matcher; no regex machinery involved.
    def match(pi: int, si: int) -> bool:
        while pi < len(pattern):
            pc = pattern[pi]
            if pc == "%":
                if match(pi + 1, si):
                    return True
                if si < len(s):
                    si += 1
                    continue
                return False
            if si >= len(s):
                return False
            if pc != "_" and pc != s[si]:
                return False
            pi += 1
            si += 1
        return si == len(s)

    return match(0, 0)


def _iso_parts(s: str) -> tuple[int, int, int] | None:
    i = 0
    n = len(s)
    y = 0
    ydigits = 0
    while i < n and s[i].isdigit() and ydigits < 4:
        y = y * 10 + int(s[i])
        i += 1
        ydigits += 1
    if ydigits == 0 or i >= n or s[i] != "-":
        return None
    i += 1
    if n - i != 5 or s[i + 2] != "-":
        return None
    if not (s[i].isdigit() and s[i + 1].isdigit() and s[i + 3].isdigit() and s[i + 4].isdigit()):
        return None
    m = int(s[i : i + 2])
    d = int(s[i + 3 : i + 5])
    return (y, m, d)


def _dim(y: int, m: int) -> int:
    if m in (1, 3, 5, 7, 8, 10, 12):
        return 31
    if m in (4, 6, 9, 11):
        return 30
    if m == 2:
        leap = y % 4 == 0 and (y % 100 != 0 or y % 400 == 0)
        return 29 if leap else 28
    return 0


# ---------------------------------------------------------------------------
# Partial evaluation


def evaluate(t: Term, asg: dict[int, Any], memo: dict[int, Any]) -> Any:
    hit = memo.get(t.tid, _MISS)
    if hit is not _MISS:
        return hit
    v = _eval(t, asg, memo)
    memo[t.tid] = v
    return v


_MISS = object()


def _eval(t: Term, asg, memo):
    op = t.op
    if op == "lit":
        return t.payload
    if op == "var":
        return asg.get(t.tid, INDET)
    if op == "and":
        indet = False
        for a in t.args:
            v = evaluate(a, asg, memo)
            if v is False:
                return False
            if v is INDET:
                indet = True
        return INDET if indet else True
    if op == "or":
        indet = False
        for a in t.args:
            v = evaluate(a, asg, memo)
            if v is True:
                return True
            if v is INDET:
                indet = True
        return INDET if indet else False
    if op == "not":
        v = evaluate(t.args[0], asg, memo)
        return INDET if v is INDET else (not v)
    if op == "ite":
        c = evaluate(t.args[0], asg, memo)
        if c is INDET:
            a = evaluate(t.args[1], asg, memo)
            if a is not INDET and a == evaluate(t.args[2], asg, memo):
                return a
            return INDET
        return evaluate(t.args[1] if c else t.args[2], asg, memo)
    vals = [evaluate(a, asg, memo) for a in t.args]
    if any(v is INDET for v in vals):
        return INDET
    if op == "eq":
        return vals[0] == vals[1]
    if op == "lt":
        return vals[0] < vals[1]
    if op == "le":
        return vals[0] <= vals[1]
    if op in _ARITH:
        return _arith_eval(op, vals[0], vals[1])
    if op == "str_to_int":
        return _str2int(vals[0])
    if op == "int_to_str":
        return _int2str(vals[0])
    if op == "substr":
        return _substr(vals[0], vals[1], vals[2])
    if op == "concat":
        return "".join(vals)
    if op == "like":
        return _like(t.payload, vals[0])
    if op == "prefix":
        return vals[0][: len(t.payload)] == t.payload
    if op == "suffix":
        p = t.payload
        return p == "" or vals[0][-len(p):] == p
    if op == "str_is_iso":
        return _iso_parts(vals[0]) is not None
    if op == "str_iso_part":
        p = _iso_parts(vals[0])
        return 0 if p is None else p[t.payload]
    if op == "days_in_month":
        return _dim(vals[0], vals[1])
    raise ValueError(f"cannot evaluate op {op!r}")


# ---------------------------------------------------------------------------
# SMT-LIB2 emission (debugging artifact; see README for semantic deltas)

_SMT_SORT = {INT: "Int", STR: "String", BOOL: "Bool"}


def _smt_str(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def _like_to_re(pattern: str) -> str:
    parts = []
    chunk = []

    def flush():
        if chunk:
            parts.append(f"(str.to_re {_smt_str(''.join(chunk))})")
            chunk.clear()

    for ch in pattern:
        if ch == "%":
            flush()
            parts.append("(re.* re.allchar)")
        elif ch == "_":
            flush()
            parts.append("re.allchar")
        else:
            chunk.append(ch)
    flush()
    if not parts:
        return f"(str.to_re {_smt_str('')})"
    if len(parts) == 1:
        return parts[0]
    return "(re.++ " + " ".join(parts) + ")"


def to_smtlib(roots: list[Term]) -> str:
    """Render the conjunction of `roots` as an SMT-LIB2 script.

    Caveats (documented, deliberate): fdiv/fmod are emitted as div/mod, whose
    negative-divisor behavior differs from floor semantics; string-to-int
    parse failures are 0 here but -1 in str.to_int; substr/iso-shape helpers
    are emitted as uninterpreted functions.
    """
    lines = [
        "(set-logic ALL)",
        "; generated formula dump; see package README for op-mapping caveats",
    ]
    seen_vars: dict[int, str] = {}
    ufs: set[str] = set()
    body: dict[int, str] = {}

    def name_of(t: Term) -> str:
        n = f"v{t.payload[1]}_{t.payload[0]}"
        return "".join(ch if ch.isalnum() or ch in "_.-" else "_" for ch in n)

    def walk(t: Term) -> str:
        hit = body.get(t.tid)
        if hit is not None:
            return hit
        s = render(t)
        body[t.tid] = s
        return s

    def render(t: Term) -> str:
        op = t.op
        if op == "lit":
            v = t.payload
            if t.sort == BOOL:
                return "true" if v else "false"
            if t.sort == INT:
                return str(v) if v >= 0 else f"(- {-v})"
            return _smt_str(v)
        if op == "var":
            n = name_of(t)
            if t.tid not in seen_vars:
                seen_vars[t.tid] = n
                lines.append(f"(declare-fun {n} () {_SMT_SORT[t.sort]})")
            return n
        a = [walk(x) for x in t.args]
        if op == "and":
            return "(and " + " ".join(a) + ")"
        if op == "or":
            return "(or " + " ".join(a) + ")"
        if op == "not":
            return f"(not {a[0]})"
        if op == "ite":
            return f"(ite {a[0]} {a[1]} {a[2]})"
        if op == "eq":
            return f"(= {a[0]} {a[1]})"
        if op == "lt":
            return (f"(str.< {a[0]} {a[1]})" if t.args[0].sort == STR else f"(< {a[0]} {a[1]})")
        if op == "le":
            return (f"(str.<= {a[0]} {a[1]})" if t.args[0].sort == STR else f"(<= {a[0]} {a[1]})")
        if op == "add":
            return f"(+ {a[0]} {a[1]})"
        if op == "sub":
            return f"(- {a[0]} {a[1]})"
        if op == "mul":
            return f"(* {a[0]} {a[1]})"
        if op == "fdiv":
            return f"(div {a[0]} {a[1]})"
        if op == "fmod":
            return f"(mod {a[0]} {a[1]})"
        if op == "str_to_int":
            return f"(str.to_int {a[0]})"
        if op == "int_to_str":
            return f"(str.from_int {a[0]})"
        if op == "like":
            return f"(str.in_re {a[0]} {_like_to_re(t.payload)})"
        if op == "prefix":
            return f"(str.prefixof {_smt_str(t.payload)} {a[0]})"
        if op == "suffix":
            return f"(str.suffixof {_smt_str(t.payload)} {a[0]})"
        if op == "substr":
            return f"(str.substr {a[0]} (- {a[1]} 1) {a[2]})"
        if op == "concat":
            return "(str.++ " + " ".join(a) + ")"
        if op == "str_is_iso":
            if "iso" not in ufs:
                ufs.add("iso")
                lines.append("(declare-fun iso_shape (String) Bool)")
            return f"(iso_shape {a[0]})"
        if op == "str_iso_part":
            fn = f"iso_part{t.payload}"
            if fn not in ufs:
                ufs.add(fn)
                lines.append(f"(declare-fun {fn} (String) Int)")
            return f"({fn} {a[0]})"
        if op == "days_in_month":
            if "dim" not in ufs:
                ufs.add("dim")
                lines.append("(declare-fun days_in_month (Int Int) Int)")
            return f"(days_in_month {a[0]} {a[1]})"
        raise ValueError(f"cannot emit op {t.op!r}")

    asserts = [walk(r) for r in roots]
    for s in asserts:
        lines.append(f"(assert {s})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
