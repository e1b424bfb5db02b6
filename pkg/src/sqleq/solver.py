"""Finite-domain model search over encoded formulas.

The search assigns the plan variables depth-first in a fixed order (deletion
flags, then cells row-major, then order-limit selectors) and re-evaluates the
root after every assignment. Partial evaluation is monotone — a term that is
determined under a partial assignment keeps its value under every extension —
so determined results are cached in a trail-backed memo that survives along a
branch and rolls back on backtrack.

Symmetry handling: interchangeable values inside one pool region (see
`domains`) are used in canonical prefix order, and deleted rows are pinned to
canonical content by the encoding itself, so the search never revisits a
model that differs only by renaming fresh values or permuting dead rows.

An exhausted search is Unsat only when the domain analysis certified the
pools complete; otherwise it is Unknown, never a fake proof.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass

from .encoder import Formula, SymDb
from .evaluator import ConcreteDb, EvalError, conform_db
from .qast import ExprType as ET
from .terms import INDET, evaluate
from .values import Date


class SortMismatch(Exception):
    pass


@dataclass(frozen=True)
class SolveBudget:
    cpu_seconds: float = 600.0
    memory_bytes: int = 4 * 1024**3

    def __post_init__(self):
        if self.cpu_seconds <= 0 or self.memory_bytes <= 0:
            raise ValueError("budget limits must be positive")


@dataclass(frozen=True)
class Sat:
    interpretation: dict[int, object]  # var tid -> concrete value


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Timeout:
    elapsed: float


@dataclass(frozen=True)
class Unknown:
    reason: str


SolveResult = Sat | Unsat | Timeout | Unknown


class _Memo(dict):
    """Evaluation cache: determined values persist (with an undo trail),
    indeterminate ones live only for a single evaluation pass."""

    __slots__ = ("scratch", "trail")

    def __init__(self):
        super().__init__()
        self.scratch: dict[int, object] = {}
        self.trail: list[int] = []

    def get(self, k, default=None):
        v = dict.get(self, k, _MISS)
        if v is not _MISS:
            return v
        return self.scratch.get(k, default)

    def __setitem__(self, k, v):
        if v is INDET:
            self.scratch[k] = v
        else:
            dict.__setitem__(self, k, v)
            self.trail.append(k)

    def rollback(self, mark: int):
        while len(self.trail) > mark:
            dict.pop(self, self.trail.pop(), None)


_MISS = object()


class _Stop(Exception):
    def __init__(self, result: SolveResult):
        self.result = result


def _maxrss_bytes() -> int:
    try:
        import resource

        return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    except Exception:
        return 0


def solve(formula: Formula, budget: SolveBudget) -> SolveResult:
    plan = formula.search_plan
    if not plan:
        raise ValueError("formula carries no search plan")
    st = formula.store
    root = formula.root
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 200_000))

    start = time.monotonic()
    deadline = start + budget.cpu_seconds
    asg: dict[int, object] = {}
    memo = _Memo()
    counts: dict[tuple[int, int, int], int] = {}
    steps = 0

    # Per-candidate region positions, for the canonical-prefix rule.
    positions: list[tuple[int, ...]] = []
    for sv in plan:
        if sv.regions:
            seen: dict[int, int] = {}
            pos = []
            for r in sv.regions:
                pos.append(seen.get(r, 0))
                seen[r] = seen.get(r, 0) + 1
            positions.append(tuple(pos))
        else:
            positions.append(())

    def tick():
        nonlocal steps
        steps += 1
        if steps % 64 == 0 and time.monotonic() > deadline:
            raise _Stop(Timeout(time.monotonic() - start))
        if steps % 8192 == 0 and _maxrss_bytes() > budget.memory_bytes:
            raise _Stop(Unknown("memory budget exceeded"))

    def assign(i: int, val, idx: int | None):
        sv = plan[i]
        if len(sv.terms) == 1:
            asg[sv.terms[0].tid] = val
        else:
            for t, v in zip(sv.terms, val):
                asg[t.tid] = v
        if idx is not None and sv.regions and sv.regions[idx] != -1:
            key = (sv.class_id, sv.regions[idx], positions[i][idx])
            counts[key] = counts.get(key, 0) + 1

    def unassign(i: int, idx: int | None):
        sv = plan[i]
        for t in sv.terms:
            del asg[t.tid]
        if idx is not None and sv.regions and sv.regions[idx] != -1:
            key = (sv.class_id, sv.regions[idx], positions[i][idx])
            counts[key] -= 1

    def allowed(i: int, idx: int | None) -> bool:
        sv = plan[i]
        if idx is None or not sv.regions or sv.regions[idx] == -1:
            return True
        pos = positions[i][idx]
        return pos == 0 or counts.get((sv.class_id, sv.regions[idx], pos - 1), 0) > 0

    def candidates(i: int):
        sv = plan[i]
        if sv.gates and any(asg.get(g.tid) is True for g in sv.gates):
            # A raised gate (deleted row, null cell) pins the value; the
            # pinned value need not sit in the searched pool.
            yield None, sv.gated_value
            return
        for idx, val in enumerate(sv.domain):
            yield idx, val

    def complete_from(i: int) -> dict[int, object]:
        for j in range(i, len(plan)):
            idx, val = next(candidates(j))
            assign(j, val, idx)
        return dict(asg)

    def dfs(i: int):
        if i == len(plan):
            raise _Stop(Sat(dict(asg)))
        for idx, val in candidates(i):
            if not allowed(i, idx):
                continue
            tick()
            assign(i, val, idx)
            mark = len(memo.trail)
            memo.scratch.clear()
            v = evaluate(root, asg, memo)
            if v is True:
                raise _Stop(Sat(complete_from(i + 1)))
            if v is not False:
                dfs(i + 1)
            memo.rollback(mark)
            unassign(i, idx)

    try:
        memo.scratch.clear()
        first = evaluate(root, asg, memo)
        if first is False:
            return Unsat()
        if first is True:
            return Sat(complete_from(0))
        dfs(0)
    except _Stop as s:
        return s.result
    except RecursionError:
        return Unknown("solver crashed: recursion depth exceeded")
    except MemoryError:
        return Unknown("memory budget exceeded")
    if formula.complete:
        return Unsat()
    return Unknown(formula.incomplete_why or "incomplete domain")


# ---------------------------------------------------------------------------
# Model decoding


def decode_database(symdb: SymDb, interpretation: dict[int, object]) -> ConcreteDb:
    """Materialize a concrete database from a satisfying assignment: deleted
    rows are dropped, null flags become Null, date triples become dates."""

    def val_of(t):
        if t.tid not in interpretation:
            raise SortMismatch(f"interpretation misses {t.payload!r}")
        return interpretation[t.tid]

    cells_by_row: dict[tuple[str, int], list] = {}
    order: list[tuple[str, int]] = []
    for c in symdb.cells:
        key = (c.table, c.row)
        if key not in cells_by_row:
            cells_by_row[key] = []
            order.append(key)
        cells_by_row[key].append(c)
    del_by_key = dict(zip(order, symdb.del_flags))

    tables: dict[str, list[tuple]] = {t.name.lower(): [] for t in symdb.schema.tables}
    for key in order:
        if val_of(del_by_key[key]) is True:
            continue
        row = []
        for c in cells_by_row[key]:
            if val_of(c.null) is True:
                row.append(None)
                continue
            if c.kind == ET.DATE:
                y, m, d = (val_of(t) for t in c.payload)
                if not all(isinstance(v, int) for v in (y, m, d)):
                    raise SortMismatch(f"non-integer date parts in {c.col!r}")
                row.append(Date(y, m, d))
            else:
                v = val_of(c.payload[0])
                want = int if c.kind == ET.INT else str
                if not isinstance(v, want) or isinstance(v, bool):
                    raise SortMismatch(f"{c.col!r} carries {type(v).__name__}")
                row.append(v)
        tables[key[0].lower()].append(tuple(row))

    db = ConcreteDb(symdb.schema, tables)
    try:
        conform_db(db)
    except EvalError as e:
        raise SortMismatch(f"decoded database does not conform: {e}") from e
    return db


def block_model(formula: Formula, interpretation: dict[int, object]) -> None:
    """Exclude the decoded database (all its selector choices at once) from
    future solves of this formula."""
    st = formula.store
    sel_tids = {t.tid for t in formula.symdb.sel_vars}
    parts = []
    for sv in formula.search_plan:
        for t in sv.terms:
            if t.tid in sel_tids or t.tid not in interpretation:
                continue
            v = interpretation[t.tid]
            if isinstance(v, bool):
                parts.append(t if v else st.not_(t))
            else:
                parts.append(st.eq(t, st.lit(v)))
    formula.root = st.and_(formula.root, st.not_(st.and_(*parts)))
