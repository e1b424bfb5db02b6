"""Search-domain construction and completeness analysis.

A finite model search needs two things beyond the formula itself: a
candidate-value pool for every unknown, and a verdict on whether exhausting
those pools *proves* unsatisfiability. Pools are seeded from the atoms the
formula actually contains — comparison boundaries, LIKE witnesses, julian
images — plus enough mutually fresh values per comparison class of cells to
realize any equality/order pattern among them.

The completeness verdict is deliberately conservative. Every boolean atom is
classified; any atom whose satisfying regions we cannot argue are covered by
the pools marks the formula incomplete, which downgrades an exhausted search
from Unsat to Unknown. Robust classes:

  * a cell (or affine image of one cell) against a constant,
  * plain cell against plain cell of the same kind,
  * range-bounded derived terms (tuple counts) against constants or cells,
  * julian images of date cells against constants or each other, and julian
    differences against constants (with day-offset closure of the pool),
  * LIKE/prefix/suffix of a string cell, one pattern per class.

Everything else — string inequalities, parsed-string arithmetic, averages —
is honest Unknown territory.
"""

from __future__ import annotations

from dataclasses import dataclass

from .encoder import Cell, Formula, SymDb
from .qast import ExprType as ET
from .terms import BOOL, STR, Store, Term, _like as like_matches
from .values import (
    Date,
    MAX_YEAR,
    MIN_YEAR,
    days_in_month,
    is_valid_date,
    julian_day,
)

_INT_POOL_CAP = 256
_STR_POOL_CAP = 128
_DATE_POOL_CAP = 200
_CHAIN_CAP = 24
_BOUNDED_EQ_CAP = 64
_DELTA_CAP = 4000

_DEFAULTS = {ET.INT: 0, ET.STR: "", ET.DATE: (1, 1, 1)}


@dataclass
class SearchVar:
    """One decision in the model search: a var (or a date cell's three vars,
    assigned jointly), its candidate values, and symmetry metadata."""

    terms: tuple[Term, ...]
    domain: tuple
    label: str = ""
    class_id: int = -1
    regions: tuple[int, ...] = ()  # per-candidate; -1 = distinguished value
    gates: tuple[Term, ...] = ()  # bool vars that force `gated_value` when true
    gated_value: object = None


_ATOM_OPS = {"eq", "lt", "le", "like", "prefix", "suffix", "str_is_iso"}


class _Union:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        p = self.parent.setdefault(x, x)
        if p != x:
            p = self.find(p)
            self.parent[x] = p
        return p

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


# Profiles describe how an integer/string term depends on the unknowns:
#   ("lit", v) | ("aff", cellref, coef, off) | ("sv", ci) | ("bnd", lo, hi)
#   | ("jul", ci, off) | ("juldiff", ci, cj) | ("fdivaff", cellref, coef,
#   off, div) | ("opq",)
# where cellref = (cell index, date component position or None).


class _Analysis:
    def __init__(self, f: Formula):
        self.f = f
        self.st: Store = f.store
        self.cells = f.symdb.cells
        self.pay2cell: dict[int, tuple[int, int | None]] = {}
        for ci, c in enumerate(self.cells):
            for pi, t in enumerate(c.payload):
                self.pay2cell[t.tid] = (ci, pi if c.kind == ET.DATE else None)
        self.uf = _Union()
        self.int_bounds: dict[int, set[int]] = {}
        self.str_lits: dict[int, set[str]] = {}
        self.patterns: dict[int, set[str]] = {}
        self.comp_bounds: dict[int, tuple[set[int], set[int], set[int]]] = {}
        self.date_seeds: dict[int, set[tuple[int, int, int]]] = {}
        self.date_deltas: dict[int, set[int]] = {}
        self.iso_seed: set[int] = set()
        self.profiles: dict[int, tuple] = {}
        self.participating: set[int] = set()
        self._esc: dict[int, bool] = {}

    def escapes(self, t: Term) -> bool:
        """Whether a payload variable reaches `t` without passing through a
        boolean atom. Dependence routed through atoms is covered by their own
        classification; anything else is invisible to the pool argument."""
        hit = self._esc.get(t.tid)
        if hit is None:
            if t.tid in self.pay2cell:
                hit = True
            else:
                hit = any(
                    self.escapes(a)
                    for a in t.args
                    if not (a.sort == BOOL and a.op in _ATOM_OPS)
                )
            self._esc[t.tid] = hit
        return hit

    def fail(self, why: str):
        if self.f.complete:
            self.f.complete = False
            self.f.incomplete_why = why

    # -- profiling -----------------------------------------------------------

    def profile(self, t: Term) -> tuple:
        hit = self.profiles.get(t.tid)
        if hit is None:
            hit = self._profile(t)
            self.profiles[t.tid] = hit
        return hit

    def _profile(self, t: Term) -> tuple:
        jul = self.st.julian_images.get(t.tid)
        if jul is not None:
            ci = self._triple_cell(jul)
            return ("jul", ci, 0) if ci is not None else ("opq",)
        op = t.op
        if op == "lit":
            return ("lit", t.payload)
        if op == "var":
            ref = self.pay2cell.get(t.tid)
            if ref is None:
                return ("opq",)
            if t.sort == STR:
                return ("sv", ref[0])
            return ("aff", ref, 1, 0)
        if op in ("add", "sub"):
            return self._add_sub(t)
        if op == "mul":
            a, b = self.profile(t.args[0]), self.profile(t.args[1])
            if a[0] == "lit":
                a, b = b, a
            if b[0] != "lit":
                return ("opq",)
            v = b[1]
            if a[0] == "aff" and v != 0:
                return ("aff", a[1], a[2] * v, a[3] * v)
            if a[0] == "bnd":
                lo, hi = a[1] * v, a[2] * v
                return ("bnd", min(lo, hi), max(lo, hi))
            if a[0] == "lit":
                return ("lit", a[1] * v)
            return ("opq",)
        if op == "fdiv":
            a, b = self.profile(t.args[0]), self.profile(t.args[1])
            if b[0] != "lit" or b[1] == 0:
                return ("opq",)
            c = b[1]
            if a[0] == "bnd":
                lo, hi = a[1] // c, a[2] // c
                return ("bnd", min(lo, hi), max(lo, hi))
            if a[0] == "aff" and 0 < c <= _BOUNDED_EQ_CAP:
                return ("fdivaff", a[1], a[2], a[3], c)
            return ("opq",)
        if op == "fmod":
            b = self.profile(t.args[1])
            if b[0] == "lit" and b[1] != 0:
                c = b[1]
                return ("bnd", 0, c - 1) if c > 0 else ("bnd", c + 1, 0)
            return ("opq",)
        if op == "ite":
            a, b = self.profile(t.args[1]), self.profile(t.args[2])
            ra = _rng(a)
            rb = _rng(b)
            if ra and rb:
                return ("bnd", min(ra[0], rb[0]), max(ra[1], rb[1]))
            return ("opq",)
        if op == "days_in_month":
            return ("bnd", 0, 31)
        return ("opq",)

    def _add_sub(self, t: Term) -> tuple:
        sub = t.op == "sub"
        a, b = self.profile(t.args[0]), self.profile(t.args[1])
        ra, rb = _rng(a), _rng(b)
        if ra and rb:
            lo = ra[0] - rb[1] if sub else ra[0] + rb[0]
            hi = ra[1] - rb[0] if sub else ra[1] + rb[1]
            return ("bnd", lo, hi)
        if a[0] == "jul" and b[0] == "jul" and sub:
            return ("juldiff", a[1], b[1])
        if a[0] == "jul" and b[0] == "lit":
            return ("jul", a[1], a[2] + (-b[1] if sub else b[1]))
        if b[0] == "jul" and a[0] == "lit" and not sub:
            return ("jul", b[1], b[2] + a[1])
        if a[0] == "aff" and b[0] == "lit":
            return ("aff", a[1], a[2], a[3] + (-b[1] if sub else b[1]))
        if b[0] == "aff" and a[0] == "lit":
            if sub:
                return ("aff", b[1], -b[2], a[1] - b[3])
            return ("aff", b[1], b[2], b[3] + a[1])
        if a[0] == "aff" and b[0] == "aff" and a[1] == b[1]:
            coef = a[2] - b[2] if sub else a[2] + b[2]
            off = a[3] - b[3] if sub else a[3] + b[3]
            if coef == 0:
                return ("bnd", off, off)
            return ("aff", a[1], coef, off)
        return ("opq",)

    def _triple_cell(self, triple: tuple[Term, Term, Term]) -> int | None:
        refs = [self.pay2cell.get(t.tid) for t in triple]
        if any(r is None for r in refs):
            return None
        ci = refs[0][0]
        if all(r[0] == ci for r in refs) and [r[1] for r in refs] == [0, 1, 2]:
            return ci
        return None

    # -- seeding --------------------------------------------------------------

    def seed_int(self, cellref, vals):
        ci, comp = cellref
        if self.cells[ci].kind == ET.DATE:
            sets = self.comp_bounds.setdefault(ci, (set(), set(), set()))
            sets[comp].update(vals)
        else:
            self.int_bounds.setdefault(ci, set()).update(vals)

    def mark(self, ci: int):
        for t in self.cells[ci].payload:
            self.participating.add(t.tid)

    # -- atom classification ----------------------------------------------------

    def classify(self, t: Term):
        op = t.op
        if op in ("like", "prefix", "suffix"):
            p = self.profile(t.args[0])
            if p[0] == "lit":
                return
            if p[0] != "sv":
                return self.fail(f"{op} over a derived string")
            pat = (
                t.payload
                if op == "like"
                else t.payload + "%" if op == "prefix" else "%" + t.payload
            )
            self.patterns.setdefault(p[1], set()).add(pat)
            self.mark(p[1])
            return
        if op == "str_is_iso":
            p = self.profile(t.args[0])
            if p[0] == "lit":
                return
            if p[0] != "sv":
                return self.fail("iso-shape test over a derived string")
            self.iso_seed.add(p[1])
            self.mark(p[1])
            return
        a, b = t.args[0], t.args[1]
        if a.sort == STR:
            return self._classify_str(op, a, b)
        return self._classify_int(op, a, b)

    def _classify_str(self, op: str, a: Term, b: Term):
        pa, pb = self.profile(a), self.profile(b)
        if pa[0] == "lit" and pb[0] == "lit":
            return
        if op in ("lt", "le"):
            return self.fail("order comparison on strings")
        if pa[0] == "lit":
            pa, pb = pb, pa
        if pa[0] == "sv" and pb[0] == "lit":
            self.str_lits.setdefault(pa[1], set()).add(pb[1])
            self.mark(pa[1])
            return
        if pa[0] == "sv" and pb[0] == "sv":
            self.uf.union(pa[1], pb[1])
            self.mark(pa[1])
            self.mark(pb[1])
            return
        return self.fail("equality over a derived string")

    def _classify_int(self, op: str, a: Term, b: Term):
        pa, pb = self.profile(a), self.profile(b)
        if pa[0] in ("lit", "bnd") and pb[0] not in ("lit", "bnd"):
            pa, pb = pb, pa
        kind = pa[0]
        if kind in ("lit", "bnd"):
            # Range profiles can hide cell variables (e.g. a bounded ite whose
            # branches read a cell). Dependence through nested atoms — group
            # membership guards, counted predicates — is fine; a cell value
            # flowing in bare loses the covering argument.
            if self.escapes(a) or self.escapes(b):
                return self.fail("comparison over derived range-bounded terms")
            return
        if kind == "aff":
            return self._aff_atom(op, pa, pb)
        if kind == "fdivaff":
            return self._fdivaff_atom(op, pa, pb)
        if kind == "jul":
            return self._jul_atom(pa, pb)
        if kind == "juldiff":
            return self._juldiff_atom(pa, pb)
        return self.fail("comparison over an unanalyzable term")

    def _aff_atom(self, op, pa, pb):
        _, ref, coef, off = pa
        self.mark(ref[0])
        if pb[0] == "lit":
            self._boundary(ref, coef, off, pb[1])
            return
        if pb[0] == "bnd":
            lo, hi = pb[1], pb[2]
            if hi - lo > _BOUNDED_EQ_CAP:
                return self.fail("cell compared against a wide derived range")
            if op == "eq":
                for v in range(lo, hi + 1):
                    self._boundary(ref, coef, off, v)
            else:
                self._boundary(ref, coef, off, lo)
                self._boundary(ref, coef, off, hi)
            return
        if pb[0] == "aff":
            ref2, coef2, off2 = pb[1], pb[2], pb[3]
            self.mark(ref2[0])
            if ref == ref2:
                c, d = coef - coef2, off - off2
                if c != 0:
                    self._boundary(ref, c, d, 0)
                return
            same_kind = self.cells[ref[0]].kind == self.cells[ref2[0]].kind
            if coef == coef2 == 1 and off == off2 and same_kind:
                if ref[1] != ref2[1]:
                    return self.fail("cross-component date comparison")
                self.uf.union(ref[0], ref2[0])
                return
            return self.fail("comparison couples differently shaped cell images")
        return self.fail("cell compared against an unanalyzable term")

    def _boundary(self, ref, coef, off, lit):
        if coef == 0:
            return
        x = (lit - off) // coef
        self.seed_int(ref, {x - 1, x, x + 1})

    def _fdivaff_atom(self, op, pa, pb):
        _, ref, coef, off, c = pa
        self.mark(ref[0])
        if pb[0] == "lit":
            levels = [pb[1]]
        elif pb[0] == "bnd" and pb[2] - pb[1] <= _BOUNDED_EQ_CAP:
            levels = list(range(pb[1], pb[2] + 1)) if op == "eq" else [pb[1], pb[2]]
        else:
            return self.fail("floor-divided cell against an unanalyzable term")
        vals: set[int] = set()
        for L in levels:
            for v in (c * L, c * (L + 1) - 1):
                x = (v - off) // coef
                vals.update({x - 1, x, x + 1})
        self.seed_int(ref, vals)

    def _jul_atom(self, pa, pb):
        _, ci, off = pa
        self.mark(ci)
        if pb[0] == "jul":
            self.mark(pb[1])
            self.uf.union(ci, pb[1])
            if off != pb[2]:
                self._delta(ci, abs(off - pb[2]) // 2)
            return
        if pb[0] == "lit":
            seeds = self.date_seeds.setdefault(ci, set())
            for base in _jd_inverse(pb[1] - off):
                seeds.update({_step(base, -1), base, _step(base, 1)})
            return
        if pb[0] == "bnd":
            self._jul_atom(pa, ("lit", pb[1]))
            self._jul_atom(pa, ("lit", pb[2]))
            return
        return self.fail("julian value against an unanalyzable term")

    def _juldiff_atom(self, pa, pb):
        _, ci, cj = pa
        self.mark(ci)
        self.mark(cj)
        self.uf.union(ci, cj)
        if pb[0] == "lit":
            return self._delta(ci, abs(pb[1]) // 2)
        if pb[0] == "bnd":
            self._delta(ci, abs(pb[1]) // 2)
            self._delta(ci, abs(pb[2]) // 2)
            return
        return self.fail("julian difference against an unanalyzable term")

    def _delta(self, ci, days):
        if days > _DELTA_CAP:
            return self.fail("julian offset too large to close over")
        ds = self.date_deltas.setdefault(self.uf.find(ci), set())
        ds.update({d for d in (days - 1, days, days + 1) if d > 0})
        if len(ds) > 8:
            return self.fail("too many distinct julian offsets")


def _rng(p: tuple) -> tuple[int, int] | None:
    if p[0] == "lit" and isinstance(p[1], int) and not isinstance(p[1], bool):
        return (p[1], p[1])
    if p[0] == "bnd":
        return (p[1], p[2])
    return None


# ---------------------------------------------------------------------------
# Date helpers (heuristic layer; verified semantics live in terms.py)


def _step(t: tuple[int, int, int], n: int) -> tuple[int, int, int]:
    y, m, d = t
    while n > 0:
        if d < days_in_month(y, m):
            d += 1
        elif m < 12:
            m, d = m + 1, 1
        elif y < MAX_YEAR:
            y, m, d = y + 1, 1, 1
        n -= 1
    while n < 0:
        if d > 1:
            d -= 1
        elif m > 1:
            m, d = m - 1, days_in_month(y, m - 1)
        elif y > MIN_YEAR:
            y, m, d = y - 1, 12, days_in_month(y - 1, 12)
        n += 1
    return (y, m, d)


def _jd_inverse(scaled: int) -> list[tuple[int, int, int]]:
    """One or two dates bracketing the given doubled julian value."""
    lo, hi = (MIN_YEAR, 1, 1), (MAX_YEAR, 12, 31)
    if scaled <= julian_day(Date(*lo)):
        return [lo]
    if scaled >= julian_day(Date(*hi)):
        return [hi]
    y0, y1 = MIN_YEAR, MAX_YEAR
    while y0 < y1:  # greatest year whose Jan 1 stays at or below the target
        mid = (y0 + y1 + 1) // 2
        if julian_day(Date(mid, 1, 1)) <= scaled:
            y0 = mid
        else:
            y1 = mid - 1
    best = (y0, 1, 1)
    for m in range(2, 13):
        if julian_day(Date(y0, m, 1)) <= scaled:
            best = (y0, m, 1)
    y, m, _ = best
    for d in range(2, days_in_month(y, m) + 1):
        if julian_day(Date(y, m, d)) <= scaled:
            best = (y, m, d)
    nxt = _step(best, 1)
    return [best] if nxt == best else [best, nxt]


def _like_witness(pattern: str, variant: int) -> str:
    out = []
    first = True
    for ch in pattern:
        if ch == "%":
            if variant and first:
                out.append(f"q{variant - 1}")
            first = False
        elif ch == "_":
            out.append(chr(ord("a") + variant % 26))
        else:
            out.append(ch)
    return "".join(out)


# ---------------------------------------------------------------------------
# Pool assembly


def _int_pool(bounds: set[int], chain: int) -> tuple[list[int], list[int]] | None:
    dist = sorted(bounds | {0})
    pool = list(dist)
    regions = [-1] * len(dist)
    rid = 0
    for v in range(dist[0] - chain, dist[0]):
        pool.append(v)
        regions.append(rid)
    for i, d in enumerate(dist):
        rid += 1
        nxt = dist[i + 1] if i + 1 < len(dist) else None
        end = d + chain if nxt is None else min(d + chain, nxt - 1)
        for v in range(d + 1, end + 1):
            pool.append(v)
            regions.append(rid)
    if len(pool) > _INT_POOL_CAP:
        return None
    return pool, regions


def _str_pool(
    lits: set[str], patterns: set[str], want_iso: bool, chain: int
) -> tuple[list[str], list[int]] | None:
    if len(patterns) > 1:
        return None
    dist = set(lits) | {""}
    if want_iso:
        dist.add("2000-01-01")
    variants: list[str] = []
    if patterns:
        (pat,) = patterns
        dist.add(_like_witness(pat, 0))
        if "%" in pat or "_" in pat:
            i = 1
            while len(variants) < chain and i < chain * 26 + 30:
                w = _like_witness(pat, i)
                if w not in dist and w not in variants and like_matches(pat, w):
                    variants.append(w)
                i += 1
    fresh: list[str] = []
    i = 0
    while len(fresh) < chain and i < chain * 4 + 40:
        w = f"zz{i}"
        i += 1
        if w in dist or any(like_matches(p, w) for p in patterns):
            continue
        fresh.append(w)
    pool = sorted(dist) + variants + fresh
    regions = [-1] * len(dist) + [0] * len(variants) + [1] * len(fresh)
    if len(pool) > _STR_POOL_CAP:
        return None
    return pool, regions


def _date_pool(
    joint: set[tuple[int, int, int]],
    comps: tuple[set[int], set[int], set[int]],
    deltas: set[int],
    chain: int,
) -> tuple[list, list[int]] | None:
    dist: set[tuple[int, int, int]] = {(1, 1, 1)}
    for t in joint:
        for n in (-1, 0, 1):
            s = _step(t, n)
            if is_valid_date(*s):
                dist.add(s)
    ys, ms, ds = comps
    if ys or ms or ds:
        yc = sorted({y for y in ys if MIN_YEAR <= y <= MAX_YEAR} or {2000})
        mc = sorted({m for m in ms if 1 <= m <= 12} or {1})
        dc = sorted({d for d in ds if 1 <= d <= 31} or {1})
        if len(yc) * len(mc) * len(dc) > 150:
            return None
        for y in yc:
            for m in mc:
                for d in dc:
                    if is_valid_date(y, m, d):
                        dist.add((y, m, d))
    fresh: list[tuple[int, int, int]] = []
    i = 0
    while len(fresh) < chain and i < chain * 3 + 30:
        c = _step((2000, 6, 15), i * 3)
        i += 1
        if c not in dist and c not in fresh:
            fresh.append(c)
    if deltas:
        grown = set(dist) | set(fresh)
        frontier = set(grown)
        for _ in range(min(chain, 6)):
            nxt = set()
            for t in frontier:
                for dd in deltas:
                    for sgn in (1, -1):
                        s = _step(t, sgn * dd)
                        if is_valid_date(*s) and s not in grown:
                            nxt.add(s)
            grown |= nxt
            frontier = nxt
            if len(grown) > _DATE_POOL_CAP:
                return None
        dist = grown - set(fresh)
    pool = sorted(dist) + fresh
    regions = [-1] * len(dist) + [0] * len(fresh)
    if len(pool) > _DATE_POOL_CAP:
        return None
    return pool, regions


def _fallback_pool(kind: ET, chain: int) -> tuple[list, list[int]]:
    if kind == ET.INT:
        vals: list = list(range(-1, chain + 1))
    elif kind == ET.STR:
        vals = [""] + [f"zz{i}" for i in range(chain)]
    else:
        vals = [(2000, 1, 1 + i) for i in range(min(chain + 1, 28))]
    return vals, [-1] * len(vals)


# ---------------------------------------------------------------------------
# Entry point


def analyze_domains(f: Formula, pin: dict | None = None) -> None:
    db = f.symdb
    if pin is not None:
        _pinned_plan(f, pin)
        return
    an = _Analysis(f)

    # Walk the root without descending into the by-construction conjuncts
    # (well-formedness guards, deleted-row canonical content, row ordering):
    # what remains is the formula's semantic content. An atom a query shares
    # with a structural constraint stays visible through the query-side path.
    nodes: list[Term] = []
    sem_tids: set[int] = set()
    stack = [f.root]
    structural = db.structural_tids
    while stack:
        t = stack.pop()
        if t.tid in sem_tids or t.tid in structural:
            continue
        sem_tids.add(t.tid)
        nodes.append(t)
        stack.extend(t.args)

    for t in nodes:
        if t.sort == BOOL and t.op in _ATOM_OPS:
            an.classify(t)

    cls_cells: dict[int, list[int]] = {}
    for ci in range(len(db.cells)):
        cls_cells.setdefault(an.uf.find(ci), []).append(ci)

    pools: dict[int, tuple[list, list[int]]] = {}
    class_ids: dict[int, int] = {}
    for root, members in cls_cells.items():
        kind = db.cells[members[0]].kind
        chain = min(len(members), _CHAIN_CAP)
        if len(members) > _CHAIN_CAP:
            an.fail("too many cells in one comparison class")
        if kind == ET.INT:
            bounds: set[int] = set()
            for ci in members:
                bounds |= an.int_bounds.get(ci, set())
            built = _int_pool(bounds, chain)
        elif kind == ET.STR:
            lits: set[str] = set()
            pats: set[str] = set()
            iso = False
            for ci in members:
                lits |= an.str_lits.get(ci, set())
                pats |= an.patterns.get(ci, set())
                iso = iso or ci in an.iso_seed
            built = _str_pool(lits, pats, iso, chain)
        else:
            joint: set[tuple[int, int, int]] = set()
            comps: tuple[set[int], set[int], set[int]] = (set(), set(), set())
            for ci in members:
                joint |= an.date_seeds.get(ci, set())
                cb = an.comp_bounds.get(ci)
                if cb:
                    for acc, src in zip(comps, cb):
                        acc |= src
            built = _date_pool(joint, comps, an.date_deltas.get(root, set()), chain)
        if built is None:
            an.fail("candidate pool exceeded its size cap")
            built = _fallback_pool(kind, chain)
        pools[root] = built
        class_ids[root] = len(class_ids)

    # Search plan: deletion flags, then cells row-major, then selectors.
    plan: list[SearchVar] = []
    for t in db.del_flags:
        plan.append(SearchVar((t,), (False, True), label=t.payload[0]))

    rows: dict[tuple[str, int], list[tuple[int, Cell]]] = {}
    order: list[tuple[str, int]] = []
    for idx, c in enumerate(db.cells):
        key = (c.table, c.row)
        if key not in rows:
            rows[key] = []
            order.append(key)
        rows[key].append((idx, c))
    # Cells and deletion flags were allocated in the same table/row order.
    del_by_key = dict(zip(order, db.del_flags))

    for key in order:
        dflag = del_by_key[key]
        for idx, c in rows[key]:
            default = _DEFAULTS[c.kind]
            label = f"{c.table}.{c.col}[{c.row}]"
            if c.null.tid in sem_tids:
                plan.append(
                    SearchVar(
                        (c.null,),
                        (False, True),
                        label=label + ".null",
                        gates=(dflag,),
                        gated_value=False,
                    )
                )
            else:
                # The flag only occurs in by-construction conjuncts, all of
                # which hold with it false.
                plan.append(SearchVar((c.null,), (False,), label=label + ".null"))
            terms = c.payload if c.kind == ET.DATE else (c.payload[0],)
            if not any(t.tid in sem_tids for t in c.payload):
                plan.append(SearchVar(terms, (default,), label=label))
                continue
            if not any(t.tid in an.participating for t in c.payload) and f.complete:
                an.fail("cell value reaches the formula outside any analyzable atom")
            root = an.uf.find(idx)
            pool, regions = pools[root]
            plan.append(
                SearchVar(
                    terms,
                    tuple(pool),
                    label=label,
                    class_id=class_ids[root],
                    regions=tuple(regions),
                    gates=(dflag, c.null),
                    gated_value=default,
                )
            )
    for t in db.sel_vars:
        plan.append(SearchVar((t,), (False, True), label=t.payload[0]))

    planned = {t.tid for sv in plan for t in sv.terms}
    for t in nodes:
        if t.op == "var" and t.tid not in planned:
            raise AssertionError(f"unplanned variable {t.payload!r}")
    f.search_plan = plan


def _pinned_plan(f: Formula, pin: dict) -> None:
    """Build the search plan over caller-supplied pools, one per type, with
    no symmetry or narrowing assumptions: exhausting them proves exactly
    'no model over these values', which is what agreement-mode callers mean.
    Deletion and null flags stay free (the null case of every pool)."""
    db = f.symdb
    f.complete = True
    f.incomplete_why = ""
    pools: dict[ET, tuple] = {}
    for kind in (ET.INT, ET.STR, ET.DATE):
        vals = list(pin.get(kind, ()))
        if kind == ET.DATE:
            vals = [
                (v.year, v.month, v.day) if isinstance(v, Date) else tuple(v)
                for v in vals
            ]
        if not vals:
            vals = [_DEFAULTS[kind]]
        pools[kind] = tuple(vals)

    plan: list[SearchVar] = []
    for t in db.del_flags:
        plan.append(SearchVar((t,), (False, True), label=t.payload[0]))
    by_row: dict[tuple[str, int], list[Cell]] = {}
    order: list[tuple[str, int]] = []
    for c in db.cells:
        key = (c.table, c.row)
        if key not in by_row:
            by_row[key] = []
            order.append(key)
        by_row[key].append(c)
    del_by_key = dict(zip(order, db.del_flags))
    for key in order:
        dflag = del_by_key[key]
        for c in by_row[key]:
            label = f"{c.table}.{c.col}[{c.row}]"
            plan.append(
                SearchVar(
                    (c.null,),
                    (False, True),
                    label=label + ".null",
                    gates=(dflag,),
                    gated_value=False,
                )
            )
            terms = c.payload if c.kind == ET.DATE else (c.payload[0],)
            plan.append(
                SearchVar(
                    terms,
                    pools[c.kind],
                    label=label,
                    gates=(dflag, c.null),
                    gated_value=_DEFAULTS[c.kind],
                )
            )
    for t in db.sel_vars:
        plan.append(SearchVar((t,), (False, True), label=t.payload[0]))
    f.search_plan = plan
