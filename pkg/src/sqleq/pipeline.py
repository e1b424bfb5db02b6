"""Bounded equivalence checking, counterexample validation, cross-method
reuse of counterexamples, and scoring.

The driving loop per query pair: encode non-equivalence at bound k, solve,
and validate any model by actually running both queries on the decoded
database. A model that validates is a real counterexample (minimal in k,
because every smaller bound was exhausted first). A model that does not —
possible only for order/limit nondeterminism — is blocked and the same
bound is retried a few times before giving up as SpuriousOnly.

An Unsat result counts as equivalence at that bound only when the search
was complete; an incomplete search that finds nothing is Inconclusive, not
a proof.
"""

from __future__ import annotations

import enum
import hashlib
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import qast as q
from .backends import (
    BackendUnavailable,
    EngineError,
    sqlite_ex,
)
from .dumps import db_hash
from .encoder import BoundOverflow, EncodeError, EncodeOpts, nonequivalence_formula
from .evaluator import ConcreteDb, EvalError, eval_query_det, ex_metric
from .features import feature_scan
from .render import to_sql
from .schema import DatabaseSchema
from .solver import (
    Sat,
    SolveBudget,
    Timeout,
    Unknown,
    Unsat,
    block_model,
    decode_database,
    solve,
)


class Reason(enum.Enum):
    TIMEOUT = "Timeout"
    UNSUPPORTED = "Unsupported"
    BOUND_OVERFLOW = "BoundOverflow"
    SPURIOUS_ONLY = "SpuriousOnly"


class Backend(enum.Enum):
    REFERENCE = "reference"
    SQLITE = "sqlite"


class Semantics(enum.Enum):
    SET = "set"


@dataclass(frozen=True)
class EquivalentUpTo:
    k_max: int


@dataclass(frozen=True)
class NotEquivalent:
    db: ConcreteDb
    found_at_bound: int
    validated: bool


@dataclass(frozen=True)
class Inconclusive:
    reason: Reason
    detail: str = ""


Verdict = EquivalentUpTo | NotEquivalent | Inconclusive

SPURIOUS_RETRIES_PER_BOUND = 3


@dataclass(frozen=True)
class TaskConfig:
    max_bound: int = 5
    budget: SolveBudget = field(default_factory=SolveBudget)
    semantics: Semantics = Semantics.SET
    exclude_degenerate: bool = True
    validation_backend: Backend = Backend.REFERENCE

    def __post_init__(self) -> None:
        if self.max_bound < 1:
            raise ValueError("max_bound must be >= 1")

    def key(self) -> tuple:
        return (
            self.max_bound,
            self.budget.cpu_seconds,
            self.budget.memory_bytes,
            self.semantics.value,
            self.exclude_degenerate,
            self.validation_backend.value,
        )


@dataclass(frozen=True)
class PairTask:
    question_id: str
    schema: DatabaseSchema
    gold: q.QueryAst
    generated: q.QueryAst
    method: str


# ---------------------------------------------------------------------------
# Single-bound check


@dataclass(frozen=True)
class BoundEquivalent:
    pass


@dataclass(frozen=True)
class BoundNotEquivalent:
    db: ConcreteDb


def _gate(q1: q.QueryAst, q2: q.QueryAst) -> Inconclusive | None:
    reasons = feature_scan(q1).reasons + feature_scan(q2).reasons
    if reasons:
        return Inconclusive(Reason.UNSUPPORTED, "; ".join(sorted(set(reasons))))
    return None


def check_bounded(
    schema: DatabaseSchema,
    q1: q.QueryAst,
    q2: q.QueryAst,
    k: int,
    budget: SolveBudget,
    opts: EncodeOpts = EncodeOpts(),
) -> BoundEquivalent | BoundNotEquivalent | Inconclusive:
    """One bound: does any database with <= k rows per table distinguish
    the queries? The returned database is solver output, not yet validated.
    """
    bad = _gate(q1, q2)
    if bad is not None:
        return bad
    verdict, _, _ = _attempt(schema, q1, q2, k, budget, opts)
    if isinstance(verdict, _IncompleteUnsat):
        return Inconclusive(Reason.UNSUPPORTED, verdict.why)
    return verdict


def _attempt(schema, q1, q2, k, budget, opts):
    """check_bounded, but keeps the formula/model so the caller can add
    blocking clauses and re-solve."""
    try:
        f = nonequivalence_formula(schema, q1, q2, k, opts)
    except BoundOverflow as exc:
        return Inconclusive(Reason.BOUND_OVERFLOW, str(exc)), None, None
    except EncodeError as exc:
        return Inconclusive(Reason.UNSUPPORTED, str(exc)), None, None
    return _solve_attempt(f, budget)


@dataclass(frozen=True)
class _IncompleteUnsat:
    """No model found, but the search space was narrowed — rules nothing in."""

    why: str


def _solve_attempt(f, budget):
    r = solve(f, budget)
    if isinstance(r, Sat):
        return BoundNotEquivalent(decode_database(f.symdb, r.interpretation)), f, r
    if isinstance(r, Unsat):
        if f.complete:
            return BoundEquivalent(), f, None
        return _IncompleteUnsat(f.incomplete_why), f, None
    if isinstance(r, Timeout):
        return Inconclusive(Reason.TIMEOUT, f"solver budget after {r.elapsed:.1f}s"), f, None
    assert isinstance(r, Unknown)
    return Inconclusive(Reason.UNSUPPORTED, r.reason), f, None


# ---------------------------------------------------------------------------
# Validation


def validate_counterexample(
    gold: q.QueryAst, gen: q.QueryAst, db: ConcreteDb, backend: Backend
) -> bool:
    """True iff the two queries really disagree on db (set semantics).

    A disagreement only counts when both results are fully determined: if a
    LIMIT cut through tied sort keys, the model merely exploited a tie-break
    choice, and another engine could pick rows on which the queries agree.
    """
    r_gold, ok_gold = eval_query_det(db, gold)
    r_gen, ok_gen = eval_query_det(db, gen)
    if not (ok_gold and ok_gen):
        return False
    if backend is Backend.SQLITE:
        try:
            return sqlite_ex(db, gen, gold) == 0
        except (BackendUnavailable, EngineError) as exc:
            warnings.warn(
                f"external engine unavailable ({exc}); validating on the "
                "reference interpreter instead",
                RuntimeWarning,
                stacklevel=2,
            )
    return ex_metric(r_gold, r_gen) == 0


# ---------------------------------------------------------------------------
# Incremental-bound loop


@dataclass
class EqcheckResult:
    verdict: Verdict
    counterexamples: tuple[ConcreteDb, ...]  # empty or singleton
    spurious_models: int = 0
    solve_secs: float = 0.0
    validate_secs: float = 0.0


def eqcheck(
    schema: DatabaseSchema,
    gold: q.QueryAst,
    gen: q.QueryAst,
    cfg: TaskConfig,
    cache: dict | None = None,
) -> EqcheckResult:
    key = None
    if cache is not None:
        key = (_schema_hash(schema), _query_hash(gold), _query_hash(gen), cfg.key())
        hit = cache.get(key)
        if hit is not None:
            return hit
    result = _eqcheck_uncached(schema, gold, gen, cfg)
    if cache is not None:
        cache[key] = result
    return result


def _eqcheck_uncached(schema, gold, gen, cfg) -> EqcheckResult:
    bad = _gate(gold, gen)
    if bad is not None:
        return EqcheckResult(bad, ())
    opts = EncodeOpts(exclude_degenerate=cfg.exclude_degenerate)
    spurious = 0
    t_solve = 0.0
    t_validate = 0.0
    incomplete_why: str | None = None
    for k in range(1, cfg.max_bound + 1):
        t0 = time.monotonic()
        verdict, f, r = _attempt(schema, gold, gen, k, cfg.budget, opts)
        t_solve += time.monotonic() - t0
        retries = SPURIOUS_RETRIES_PER_BOUND
        while isinstance(verdict, BoundNotEquivalent):
            t0 = time.monotonic()
            ok = validate_counterexample(gold, gen, verdict.db, cfg.validation_backend)
            t_validate += time.monotonic() - t0
            if ok:
                return EqcheckResult(
                    NotEquivalent(verdict.db, k, validated=True),
                    (verdict.db,),
                    spurious,
                    t_solve,
                    t_validate,
                )
            spurious += 1
            if retries == 0:
                return EqcheckResult(
                    Inconclusive(
                        Reason.SPURIOUS_ONLY,
                        f"{spurious} models at bound {k} all failed validation",
                    ),
                    (),
                    spurious,
                    t_solve,
                    t_validate,
                )
            retries -= 1
            block_model(f, r.interpretation)
            t0 = time.monotonic()
            verdict, f, r = _solve_attempt(f, cfg.budget)
            t_solve += time.monotonic() - t0
        if isinstance(verdict, Inconclusive):
            return EqcheckResult(verdict, (), spurious, t_solve, t_validate)
        if isinstance(verdict, _IncompleteUnsat):
            # No proof at this bound, but deeper bounds can still refute;
            # only the final equivalence claim is off the table.
            if incomplete_why is None:
                incomplete_why = verdict.why
            continue
        # Unsat after blocking only spurious models still rules out every
        # genuine witness at this bound, so moving to k+1 stays sound.
        assert isinstance(verdict, BoundEquivalent)
    if incomplete_why is not None:
        return EqcheckResult(
            Inconclusive(Reason.UNSUPPORTED, incomplete_why),
            (),
            spurious,
            t_solve,
            t_validate,
        )
    return EqcheckResult(
        EquivalentUpTo(cfg.max_bound), (), spurious, t_solve, t_validate
    )


# ---------------------------------------------------------------------------
# Cache keys


def _schema_hash(schema: DatabaseSchema) -> str:
    parts = []
    for t in schema.tables:
        cols = ",".join(f"{c.name}:{c.type.value}" for c in t.columns)
        parts.append(f"{t.name}({cols})pk[{','.join(t.primary_key)}]")
    return hashlib.sha256(";".join(parts).encode("utf-8")).hexdigest()


def _query_hash(node: q.QueryAst) -> str:
    return hashlib.sha256(to_sql(node).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Whole-task driver


@dataclass
class TaskResult:
    task: PairTask
    verdict: Verdict
    counterexamples: tuple[ConcreteDb, ...]
    cross_checked: tuple[ConcreteDb, ...]  # own + gained; filled by cross_check
    ex_static: int | None = None  # EX on the benchmark's static db, if any
    spurious_models: int = 0
    solve_secs: float = 0.0
    validate_secs: float = 0.0


def run_task(task: PairTask, cfg: TaskConfig, cache: dict | None = None) -> TaskResult:
    r = eqcheck(task.schema, task.gold, task.generated, cfg, cache)
    return TaskResult(
        task=task,
        verdict=r.verdict,
        counterexamples=r.counterexamples,
        cross_checked=r.counterexamples,
        spurious_models=r.spurious_models,
        solve_secs=r.solve_secs,
        validate_secs=r.validate_secs,
    )


def run_tasks(
    tasks: list[PairTask], cfg: TaskConfig, parallelism: int = 1
) -> list[TaskResult]:
    """eqcheck over independent tasks, optionally across worker processes.

    Output order follows input order regardless of worker scheduling."""
    if parallelism <= 1 or len(tasks) <= 1:
        cache: dict = {}
        return [run_task(t, cfg, cache) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run_task, tasks, [cfg] * len(tasks)))


# ---------------------------------------------------------------------------
# Cross-method counterexample reuse


def cross_check(results: list[TaskResult], cfg: TaskConfig) -> list[TaskResult]:
    """Counterexamples found against one method are tried against every
    other method answering the same question. Sets only ever grow, and a
    database joins a set only by actually distinguishing that method's
    query from gold."""
    by_question: dict[str, dict[str, ConcreteDb]] = {}
    for r in results:
        pool = by_question.setdefault(r.task.question_id, {})
        for db in r.counterexamples:
            pool.setdefault(db_hash(db), db)

    order = sorted(range(len(results)), key=lambda i: (results[i].task.question_id, results[i].task.method))
    out: list[TaskResult] = list(results)
    for i in order:
        r = results[i]
        pool = by_question.get(r.task.question_id, {})
        own = {db_hash(db) for db in r.counterexamples}
        gained = list(r.counterexamples)
        for h in sorted(pool):
            if h in own:
                continue
            db = pool[h]
            try:
                distinguishes = (
                    validate_counterexample(
                        r.task.gold, r.task.generated, db, cfg.validation_backend
                    )
                )
            except EvalError:
                continue
            if distinguishes:
                gained.append(db)
        out[i] = replace(r, cross_checked=tuple(gained))
    return out


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class MethodScore:
    method: str
    n: int
    ex_accuracy: float
    verify_accuracy: float
    verify_cc_accuracy: float
    ex_rank: int = 0
    verify_rank: int = 0
    verify_cc_rank: int = 0
    demotions: int = 0
    demotions_cc: int = 0


@dataclass(frozen=True)
class ScoreReport:
    methods: tuple[MethodScore, ...]
    # question_id -> how many methods were demoted there (EX pass, verify fail)
    demotions_per_question: dict[str, int]

    def histogram(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for n in self.demotions_per_question.values():
            out[n] = out.get(n, 0) + 1
        return out


def score(results: list[TaskResult]) -> ScoreReport:
    """Per-method accuracy under EX, verify, and verify+cross-check.

    A pair passes verify iff it passes EX *and* no validated counterexample
    demotes it; verification never promotes. Pairs with no static EX result
    count as failures under all three metrics. Ranks break ties by method
    name so they stay a permutation.
    """
    methods = sorted({r.task.method for r in results})
    per_q_demote: dict[str, int] = {}
    rows = []
    for m in methods:
        mine = [r for r in results if r.task.method == m]
        n = len(mine)
        ex_pass = verify_pass = cc_pass = demoted = demoted_cc = 0
        for r in mine:
            ex = bool(r.ex_static)
            ex_pass += ex
            demote = bool(r.counterexamples)
            demote_cc = bool(r.cross_checked)
            verify_pass += ex and not demote
            cc_pass += ex and not demote_cc
            demoted += ex and demote
            demoted_cc += ex and demote_cc
            if ex and demote:
                qid = r.task.question_id
                per_q_demote[qid] = per_q_demote.get(qid, 0) + 1

        def pct(c: int) -> float:
            return 100.0 * c / n if n else 0.0

        rows.append(
            MethodScore(
                method=m,
                n=n,
                ex_accuracy=pct(ex_pass),
                verify_accuracy=pct(verify_pass),
                verify_cc_accuracy=pct(cc_pass),
                demotions=demoted,
                demotions_cc=demoted_cc,
            )
        )
    ranked = {}
    for attr in ("ex_accuracy", "verify_accuracy", "verify_cc_accuracy"):
        order = sorted(rows, key=lambda s: (-getattr(s, attr), s.method))
        ranked[attr] = {s.method: i + 1 for i, s in enumerate(order)}
    final = tuple(
        MethodScore(
            method=s.method,
            n=s.n,
            ex_accuracy=s.ex_accuracy,
            verify_accuracy=s.verify_accuracy,
            verify_cc_accuracy=s.verify_cc_accuracy,
            ex_rank=ranked["ex_accuracy"][s.method],
            verify_rank=ranked["verify_accuracy"][s.method],
            verify_cc_rank=ranked["verify_cc_accuracy"][s.method],
            demotions=s.demotions,
            demotions_cc=s.demotions_cc,
        )
        for s in rows
    )
    return ScoreReport(final, per_q_demote)
