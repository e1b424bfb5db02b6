"""One-shot fixture builder: writes tests/fixtures/* then smoke-runs the harness."""
import json
from pathlib import Path

from sqleq.dumps import dump_db, insert_script
from sqleq.evaluator import ConcreteDb, conform_db
from sqleq.schema import make_schema
from sqleq.values import Date

ROOT = Path("tests/fixtures")
SCHEMAS = ROOT / "schemas"

schemas = {
    "hospital": {
        "db_id": "hospital",
        "tables": [
            {
                "name": "patient",
                "columns": [
                    ["id", "int"], ["sex", "str"], ["birthday", "date"],
                    ["description", "date"], ["first_date", "date"],
                    ["admission", "str"], ["diagnosis", "str"],
                ],
                "primary_key": ["id"],
            },
            {
                "name": "laboratory",
                "columns": [
                    ["id", "int"], ["date", "date"], ["got", "int"],
                    ["gpt", "int"], ["ldh", "int"], ["rnp", "str"], ["plt", "int"],
                ],
            },
            {
                "name": "examination",
                "columns": [
                    ["id", "int"], ["examination_date", "date"],
                    ["acl_igg", "int"], ["acl_igm", "int"], ["ana", "int"],
                    ["ana_pattern", "str"], ["acl_iga", "int"],
                    ["diagnosis", "str"], ["kct", "str"], ["rvvt", "str"],
                    ["lac", "str"],
                ],
            },
        ],
    },
    "debit_card": {
        "db_id": "debit_card",
        "tables": [
            {
                "name": "transactions_1k",
                "columns": [
                    ["transactionid", "int"], ["gasstationid", "int"],
                    ["date", "date"], ["time", "int"],
                ],
            },
            {
                "name": "gasstations",
                "columns": [["gasstationid", "int"], ["country", "str"]],
                "primary_key": ["gasstationid"],
            },
        ],
    },
    "student_club": {
        "db_id": "student_club",
        "tables": [
            {
                "name": "member",
                "columns": [
                    ["first_name", "str"], ["last_name", "str"],
                    ["link_to_major", "str"], ["position", "str"],
                ],
            },
            {
                "name": "major",
                "columns": [
                    ["major_id", "str"], ["major_name", "str"],
                    ["department", "str"], ["college", "str"],
                ],
                "primary_key": ["major_id"],
            },
        ],
    },
    "card_games": {
        "db_id": "card_games",
        "tables": [
            {
                "name": "cards",
                "columns": [["uuid", "str"], ["type", "str"], ["side", "str"]],
                "primary_key": ["uuid"],
            },
            {
                "name": "legalities",
                "columns": [["uuid", "str"], ["format", "str"], ["status", "str"]],
            },
        ],
    },
    "codebase_comments": {
        "db_id": "codebase_comments",
        "tables": [
            {
                "name": "comments",
                "columns": [["postId", "int"], ["score", "int"], ["text", "str"]],
            },
            {
                "name": "posts",
                "columns": [["id", "int"], ["viewCount", "int"]],
                "primary_key": ["id"],
            },
        ],
    },
}

for name, doc in schemas.items():
    (SCHEMAS / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
    schema = make_schema(doc)
    empty = ConcreteDb(schema)
    conform_db(empty)
    (SCHEMAS / f"{name}.static.sql").write_text(insert_script(empty))

pairs = [
    {
        "question_id": "q01",
        "db_id": "hospital",
        "question_text": "Latest birthday among patients whose lab work shows an rnp value other than '-'.",
        "gold_sql": "SELECT T1.birthday FROM patient AS T1 INNER JOIN laboratory AS T2 ON T1.ID = T2.ID WHERE T2.rnp != '-' OR '+-' ORDER BY T1.birthday DESC LIMIT 1",
        "predictions": {"baseline": "SELECT patient.birthday FROM patient INNER JOIN laboratory ON patient.ID = laboratory.ID WHERE NOT laboratory.rnp IN ('-', '+-') ORDER BY patient.birthday DESC LIMIT 1"},
    },
    {
        "question_id": "q02",
        "db_id": "hospital",
        "question_text": "Count of male patients examined between 1995 and 1997, diagnosed with Behcet, not admitted.",
        "gold_sql": "SELECT COUNT(T1.id) FROM patient AS T1 INNER JOIN examination AS T2 ON T1.id = T2.id WHERE T2.diagnosis = 'Behcet' AND T1.sex = 'M' AND STRFTIME('%Y', T2.examination_date) BETWEEN '1995' AND '1997' AND T1.admission = '-';",
        "predictions": {"baseline": "SELECT COUNT(DISTINCT patient.id) FROM patient INNER JOIN examination ON patient.id = examination.id WHERE patient.sex = 'M' AND examination.examination_date BETWEEN '1995-01-01' AND '1997-12-31' AND examination.diagnosis = 'Behcet' AND patient.admission = '-';"},
    },
    {
        "question_id": "q03",
        "db_id": "debit_card",
        "question_text": "Count of transactions at Czech gas stations from 2012 onward.",
        "gold_sql": "SELECT COUNT(T1.transactionid) FROM transactions_1k AS T1 INNER JOIN gasstations AS T2 ON T1.gasstationid = T2.gasstationid WHERE T2.country = 'CZE' AND STRFTIME('%Y', T1.date) >= '2012';",
        "predictions": {"baseline": "SELECT COUNT(*) FROM transactions_1k AS T INNER JOIN gasstations AS G ON T.gasstationid = G.gasstationid WHERE G.country = 'CZE' AND T.date > '2012-01-01';"},
    },
    {
        "question_id": "q04",
        "db_id": "debit_card",
        "question_text": "Country of the gas station serving the last transaction on 2012-08-25.",
        "gold_sql": "SELECT T2.country FROM transactions_1k AS T1 INNER JOIN gasstations AS T2 ON T1.gasstationid = T2.gasstationid WHERE T1.date = '2012-08-25' ORDER BY T1.time DESC LIMIT 1;",
        "predictions": {"baseline": "SELECT G.country FROM gasstations AS G JOIN ( SELECT gasstationid FROM transactions_1k WHERE date = '2012-08-25' ORDER BY time ASC LIMIT 1 ) AS T ON G.gasstationid = T.gasstationid;"},
    },
    {
        "question_id": "q05",
        "db_id": "hospital",
        "question_text": "Platelet counts in the normal band for patients diagnosed with MCTD.",
        "gold_sql": "SELECT T2.plt FROM patient AS T1 INNER JOIN laboratory AS T2 ON T1.id = T2.id WHERE T1.diagnosis = 'MCTD' AND T2.plt BETWEEN 100 AND 400",
        "predictions": {"baseline": "SELECT L.plt FROM LABORATORY L INNER JOIN PATIENT P ON L.id = P.id WHERE P.diagnosis = 'MCTD' AND L.plt > 100 AND L.plt < 400"},
    },
    {
        "question_id": "q06",
        "db_id": "student_club",
        "question_text": "College of the major a member named Katy is linked to.",
        "gold_sql": "SELECT T2.college FROM member AS T1 INNER JOIN major AS T2 ON T2.major_id = T1.link_to_major WHERE T1.link_to_major = 'rec1N0upiVLy5esTO' AND T1.first_name = 'Katy'",
        "predictions": {"baseline": "SELECT major.college FROM member INNER JOIN MAJOR ON member.link_to_major = major.major_id WHERE member.first_name = 'Katy'"},
    },
    {
        "question_id": "q07",
        "db_id": "student_club",
        "question_text": "Names, departments and colleges of ordinary members majoring in Enviormental Engineering.",
        "gold_sql": "SELECT T2.last_name, T1.department, T1.college FROM major AS T1 INNER JOIN member AS T2 ON T1.major_id = T2.link_to_major WHERE T2.position = 'Member' AND T1.major_name = 'Enviormental Engineering'",
        "predictions": {"baseline": "SELECT T1.last_name, T2.department, T2.college FROM member AS T1 INNER JOIN major AS T2 ON T1.link_to_major = T2.major_id WHERE T2.major_name = 'Enviormental Engineering'"},
    },
    {
        "question_id": "q08",
        "db_id": "card_games",
        "question_text": "Vintage-format legal statuses of single-sided Artifact cards.",
        "gold_sql": "SELECT DISTINCT T2.status FROM cards AS T1 INNER JOIN legalities AS T2 ON T1.uuid = T2.uuid WHERE T1.type = 'Artifact' AND T2.format = 'vintage' AND T1.side IS NULL;",
        "predictions": {"baseline": "SELECT T2.status FROM cards AS T1 JOIN legalities AS T2 ON T1.uuid = T2.uuid WHERE T1.type = 'Artifact' AND T1.side IS NULL AND T2.format = 'vintage';"},
    },
    {
        "question_id": "q09",
        "db_id": "codebase_comments",
        "question_text": "Text of the highest-scored comment on posts with 100 to 150 views.",
        "gold_sql": "SELECT text FROM comments WHERE postId IN ( SELECT id FROM posts WHERE viewCount BETWEEN 100 AND 150 ) ORDER BY score DESC LIMIT 1",
        "predictions": {"baseline": "SELECT T2.text FROM posts AS T1 INNER JOIN comments AS T2 ON T1.id = T2.postId WHERE T1.viewCount BETWEEN 100 AND 150 ORDER BY T2.score DESC LIMIT 1"},
    },
]

(ROOT / "pairs.jsonl").write_text(
    "".join(json.dumps(p, sort_keys=True) + "\n" for p in pairs)
)

# Known witness database for the q01 pair: one patient with an rnp reading of
# '+-'. The gold query's dangling OR keeps the row; the prediction drops it.
hospital = make_schema(schemas["hospital"])
witness = ConcreteDb(hospital)
witness.tables["patient"] = [
    (0, "1", Date(1000, 1, 1), Date(1000, 1, 1), Date(1000, 1, 1), "1", "1")
]
witness.tables["laboratory"] = [(0, Date(1000, 1, 1), 0, 0, 0, "+-", None)]
witness.tables["examination"] = []
conform_db(witness)
(ROOT / "hospital_witness.json").write_text(dump_db(witness))
print("fixtures written")
