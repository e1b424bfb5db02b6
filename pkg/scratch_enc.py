import time

from sqleq.schema import make_schema
from sqleq.parser import parse_sql
from sqleq.encoder import EncodeOpts, nonequivalence_formula
from sqleq.solver import SolveBudget, Sat, Unsat, Timeout, Unknown, solve, decode_database, block_model
from sqleq.evaluator import eval_query, ex_metric

schema = make_schema({
    "tables": [
        {"name": "t", "columns": [["id", "int"], ["name", "str"]], "primary_key": ["id"]},
    ]
})

B = SolveBudget(cpu_seconds=60)

def check(sql1, sql2, k):
    q1 = parse_sql(sql1, schema)
    q2 = parse_sql(sql2, schema)
    t0 = time.time()
    f = nonequivalence_formula(schema, q1, q2, k)
    r = solve(f, B)
    dt = time.time() - t0
    tag = type(r).__name__
    extra = ""
    if isinstance(r, Sat):
        db = decode_database(f.symdb, r.interpretation)
        ex = ex_metric(eval_query(db, q1), eval_query(db, q2))
        extra = f" ex={ex} db={dict(db.tables)}"
    if isinstance(r, Unknown):
        extra = f" ({r.reason})"
    print(f"k={k} {tag:8s} {dt*1000:7.1f}ms complete={f.complete} | {sql1!r} vs {sql2!r}{extra}")
    return r, f

# identical queries fold away
check("SELECT id FROM t", "SELECT id FROM t", 3)
# truly equivalent rewrite
for k in (1, 2, 3):
    check("SELECT id FROM t WHERE id > 1", "SELECT id FROM t WHERE id >= 2", k)
# inequivalent: boundary row id=1
check("SELECT id FROM t WHERE id > 0", "SELECT id FROM t WHERE id > 1", 1)
# null handling difference
check("SELECT id FROM t WHERE name = 'a' OR name <> 'a'", "SELECT id FROM t", 1)
# distinct vs plain (inequivalent without pk dups? id is pk so rows unique... names can repeat)
check("SELECT name FROM t", "SELECT DISTINCT name FROM t", 2)
# distinct idempotence — equivalent
for k in (1, 2, 3):
    check("SELECT DISTINCT name FROM t", "SELECT DISTINCT name FROM t WHERE 1 = 1", k)
