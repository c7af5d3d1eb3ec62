import json

import pytest

from dbx import nrae
from dbx.cli import main
from dbx.fuzz import run_difftest, run_one_case


@pytest.fixture
def org2(tmp_path):
    sql = tmp_path / "org2.sql"
    sql.write_text(
        "create table employees (name text, age int);\n"
        "select name from employees where age > 32;\n"
    )
    db = tmp_path / "db1.json"
    db.write_text(
        json.dumps(
            {
                "employees": [
                    {"name": "John", "age": 34},
                    {"name": "Joan", "age": 32},
                    {"name": "Jim", "age": 33},
                    {"name": None, "age": 35},
                    {"name": "Jill", "age": None},
                ]
            }
        )
    )
    return sql, db


def test_run_prints_expected_json(org2, capsys):
    sql, db = org2
    assert main(["run", str(sql), "--db", str(db)]) == 0
    assert capsys.readouterr().out.strip() == '[{"name":"John"},{"name":"Jim"},{"name":null}]'


def test_all_stages_agree_via_cli(org2, capsys):
    sql, db = org2
    outputs = set()
    for stage in ("sqlalg", "nrae", "nnrc", "nnrs", "nnrsimp", "imp"):
        assert main(["run", str(sql), "--db", str(db), "--stage", stage]) == 0
        outputs.add(capsys.readouterr().out.strip())
    assert len(outputs) == 1


def test_compile_emits_artifacts_and_sidecar(org2, capsys, tmp_path):
    sql, _ = org2
    assert main(["compile", str(sql), "--emit", "js"]) == 0
    js = sql.with_suffix(".js")
    sidecar = sql.with_suffix(".schema.json")
    assert js.exists() and sidecar.exists()
    assert json.loads(sidecar.read_text()) == {
        "employees": {"name": "text", "age": "int"}
    }
    for stage in ("sqlalg", "nrae", "nnrc", "nnrs", "nnrsimp", "imp"):
        assert main(["compile", str(sql), "--emit", stage]) == 0


def test_unsupported_feature_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.sql"
    bad.write_text("create table R (a int); select distinct a from R;")
    assert main(["compile", str(bad)]) == 2
    assert "not supported" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.sql"
    bad.write_text("create table R (a int); select from R;")
    assert main(["compile", str(bad)]) == 2


def test_schema_mismatch_exit_code(org2, tmp_path, capsys):
    sql, _ = org2
    db = tmp_path / "bad_db.json"
    db.write_text(json.dumps({"employees": [{"name": 3, "age": 1}]}))
    assert main(["run", str(sql), "--db", str(db)]) == 2


def test_difftest_empty_report():
    report = run_difftest(seed=1, cases=0)
    assert report == {"seed": 1, "cases": 0, "failures": []}


def test_difftest_parallel_matches_serial():
    serial = run_difftest(seed=5, cases=24, jobs=1)
    parallel = run_difftest(seed=5, cases=24, jobs=4)
    assert serial == parallel


def test_mutation_is_caught_and_named(monkeypatch):
    # breaking a rewrite must surface as an optimizer failure
    def bogus_rule(q):
        if isinstance(q, nrae.Select):
            return q.src
        return None

    monkeypatch.setattr(nrae, "REWRITE_RULES", nrae.REWRITE_RULES + (bogus_rule,))
    found = None
    for seed in range(120):
        res = run_one_case(seed)
        if res is not None:
            found = res
            break
    assert found is not None
    kinds = {f["kind"] for f in found["failures"]}
    assert "optimizer" in kinds
    assert found["query"]


def test_stage_mutation_names_the_pair(monkeypatch):
    from dbx import ops

    real = ops.apply_binary_ejson

    def broken(op, a, b):
        out = real(op, a, b)
        if op.name == "eq_sql":
            from dbx.data_model import EBool

            return EBool(not out.value)
        return out

    monkeypatch.setattr(ops, "apply_binary_ejson", broken)
    found = None
    for seed in range(120):
        res = run_one_case(seed)
        if res is not None:
            found = res
            break
    assert found is not None
    pairs = [f.get("stages") for f in found["failures"] if f["kind"] == "stage"]
    assert any(p and p[1] == "imp_ejson" for p in pairs)


def test_difftest_exit_code(monkeypatch, capsys):
    def bogus_rule(q):
        if isinstance(q, nrae.Select):
            return q.src
        return None

    monkeypatch.setattr(nrae, "REWRITE_RULES", nrae.REWRITE_RULES + (bogus_rule,))
    assert main(["difftest", "--cases", "30", "--seed", "3"]) == 3
