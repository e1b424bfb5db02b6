from sqleq.schema import make_schema
from sqleq.parser import parse_sql
from sqleq.evaluator import ConcreteDb
from sqleq.dumps import dump_db, db_hash, load_db, insert_script
from sqleq import backends
from sqleq.values import Date

schema = make_schema({
    "tables": [
        {"name": "emp", "columns": [["id", "int"], ["name", "str"], ["dept", "str"], ["sal", "int"], ["hired", "date"]], "primary_key": ["id"]},
        {"name": "dept", "columns": [["dname", "str"], ["budget", "int"]], "primary_key": ["dname"]},
    ]
})

db = ConcreteDb(schema)
db.tables["emp"] = [
    (1, "ann", "eng", 100, Date(2021, 3, 5)),
    (2, None, "ops", None, Date(1999, 12, 31)),
    (3, "bob", "eng", 50, None),
]
db.tables["dept"] = [("eng", 7), ("ops", None)]

text = dump_db(db)
print("dump:", text, end="")
print("hash:", db_hash(db))
db2 = load_db(text, schema)
assert dump_db(db2) == text, "round trip"
print(insert_script(db))

pairs = [
    ("SELECT id FROM emp WHERE strftime('%Y', hired) = '2021'",
     "SELECT id FROM emp WHERE hired >= '2021-01-01' AND hired <= '2021-12-31'"),
    ("SELECT id FROM emp WHERE julianday(hired) > julianday('2020-01-01')",
     "SELECT id FROM emp WHERE hired > '2020-01-01'"),
    ("SELECT dept, COUNT(*) FROM emp GROUP BY dept",
     "SELECT dept, COUNT(*) FROM emp GROUP BY dept HAVING COUNT(*) >= 1"),
    ("SELECT e.id FROM emp e LEFT JOIN dept d ON e.dept = d.dname",
     "SELECT e.id FROM emp e JOIN dept d ON e.dept = d.dname"),
    ("SELECT DISTINCT dept FROM emp",
     "SELECT dept FROM emp"),
    ("SELECT name FROM emp WHERE name IS NULL",
     "SELECT name FROM emp WHERE 0"),
    ("SELECT MAX(sal) FROM emp",
     "SELECT sal FROM emp ORDER BY sal DESC LIMIT 1"),
    ("SELECT julianday(hired) FROM emp WHERE id = 1",
     "SELECT julianday('2021-03-05') FROM emp WHERE id = 1"),
]
for s1, s2 in pairs:
    q1, q2 = parse_sql(s1, schema), parse_sql(s2, schema)
    ref = backends.reference_ex(db, q1, q2)
    ext = backends.sqlite_ex(db, q1, q2)
    r1, e1 = backends.reference_result_set(db, q1), backends.sqlite_rows(db, q1)
    r2, e2 = backends.reference_result_set(db, q2), backends.sqlite_rows(db, q2)
    mark = "OK " if (ref == ext and r1 == e1 and r2 == e2) else "*** MISMATCH"
    print(f"{mark} ref={ref} ext={ext} | {s1!r} vs {s2!r}")
    if mark != "OK ":
        print("   ref q1:", sorted(r1), "\n   ext q1:", sorted(e1))
        print("   ref q2:", sorted(r2), "\n   ext q2:", sorted(e2))
