import time

from sqleq.schema import make_schema
from sqleq.parser import parse_sql
from sqleq.encoder import BoundOverflow, EncodeOpts, nonequivalence_formula
from sqleq.solver import SolveBudget, Sat, Unsat, Timeout, Unknown, solve, decode_database
from sqleq.evaluator import eval_query, ex_metric

schema = make_schema({
    "tables": [
        {"name": "emp", "columns": [["id", "int"], ["name", "str"], ["dept", "str"], ["sal", "int"], ["hired", "date"]], "primary_key": ["id"]},
        {"name": "dept", "columns": [["dname", "str"], ["budget", "int"]], "primary_key": ["dname"]},
    ]
})

B = SolveBudget(cpu_seconds=120)

def check(sql1, sql2, k, opts=EncodeOpts(), expect=None):
    q1 = parse_sql(sql1, schema)
    q2 = parse_sql(sql2, schema)
    t0 = time.time()
    try:
        f = nonequivalence_formula(schema, q1, q2, k, opts)
    except BoundOverflow as e:
        print(f"k={k} BoundOverflow ({e}) | {sql1!r} vs {sql2!r}")
        return
    r = solve(f, B)
    dt = time.time() - t0
    tag = type(r).__name__
    extra = ""
    if isinstance(r, Sat):
        db = decode_database(f.symdb, r.interpretation)
        ex = ex_metric(eval_query(db, q1), eval_query(db, q2))
        extra = f" ex={ex} nondet={f.nondeterministic} db={dict(db.tables)}"
    if isinstance(r, Unknown):
        extra = f" ({r.reason})"
    status = "" if expect is None or expect == tag else "  *** EXPECTED " + expect
    print(f"k={k} {tag:8s} {dt*1000:8.1f}ms complete={f.complete} | {sql1!r} vs {sql2!r}{extra}{status}")

# HAVING COUNT boundary
check("SELECT dept FROM emp GROUP BY dept HAVING COUNT(*) > 1",
      "SELECT dept FROM emp GROUP BY dept HAVING COUNT(*) >= 1", 2, expect="Sat")
check("SELECT dept FROM emp GROUP BY dept HAVING COUNT(*) > 1",
      "SELECT dept FROM emp GROUP BY dept HAVING COUNT(*) >= 2", 3, expect="Unsat")
# join vs where (inner join on equality)
check("SELECT e.id FROM emp e JOIN dept d ON e.dept = d.dname",
      "SELECT e.id FROM emp e, dept d WHERE e.dept = d.dname", 2, expect="Unsat")
# left join differs from inner when unmatched
check("SELECT e.id FROM emp e LEFT JOIN dept d ON e.dept = d.dname",
      "SELECT e.id FROM emp e JOIN dept d ON e.dept = d.dname", 1, expect="Sat")
# dates: julian window vs direct compare
check("SELECT id FROM emp WHERE julianday(hired) > julianday('2020-01-01')",
      "SELECT id FROM emp WHERE hired > '2020-01-01'", 1, expect="Unsat")
check("SELECT id FROM emp WHERE julianday(hired) >= julianday('2020-01-01')",
      "SELECT id FROM emp WHERE hired > '2020-01-01'", 1, expect="Sat")
# strftime component
check("SELECT id FROM emp WHERE strftime('%Y', hired) = '2021'",
      "SELECT id FROM emp WHERE hired >= '2021-01-01' AND hired <= '2021-12-31'", 1, expect="Unsat")
# IN subquery vs join-style exists
check("SELECT id FROM emp WHERE dept IN (SELECT dname FROM dept)",
      "SELECT id FROM emp WHERE dept IN (SELECT dname FROM dept WHERE budget >= 0 OR budget < 0 OR budget IS NULL)", 2, expect="Unsat")
# union vs or
check("SELECT id FROM emp WHERE sal > 10 UNION SELECT id FROM emp WHERE sal < 5",
      "SELECT id FROM emp WHERE sal > 10 OR sal < 5", 2, expect="Unsat")
# order by limit: loose ties -> sat spurious possible; equivalent pair should *search* spurious
check("SELECT name FROM emp ORDER BY sal LIMIT 1",
      "SELECT name FROM emp ORDER BY sal LIMIT 1", 2, expect="Sat")
# degenerate exclusion: a IS NULL trick pair
check("SELECT sal FROM emp WHERE sal IS NULL", "SELECT sal FROM emp WHERE 1 = 0", 1, expect="Sat")
check("SELECT sal FROM emp WHERE sal IS NULL", "SELECT sal FROM emp WHERE 1 = 0", 1,
      opts=EncodeOpts(exclude_degenerate=True), expect="Unsat")
# aggregate SUM / AVG (incomplete domains expected on unsat side)
check("SELECT SUM(sal) FROM emp", "SELECT SUM(sal) FROM emp WHERE sal IS NOT NULL", 2, expect="Unsat")
check("SELECT AVG(sal) FROM emp", "SELECT SUM(sal) / COUNT(sal) FROM emp", 2)
# bound overflow: triple self join at k=5 -> 125 > 64
check("SELECT a.id FROM emp a, emp b, emp c", "SELECT a.id FROM emp a", 5)
