"""Benchmark corpus loading and the bench/performance runners.

The corpus ships inside the package: the null-semantics and
correlated-query suites (queries checked in verbatim with their
expected outputs) and the walkthrough queries, each with its instance.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources

from . import pipeline as P
from .data_model import Instance

SUITES = ("null", "correlated", "walkthrough")


@dataclass
class BenchmarkCase:
    suite: str
    name: str
    sql: str
    instance_json: dict
    expected_json: str


def _suite_dir(suite: str):
    return resources.files("dbx") / "benchmarks" / suite


def load_suite(suite: str) -> list[BenchmarkCase]:
    root = _suite_dir(suite)
    shared_instance = None
    inst_file = root / "instance.json"
    if inst_file.is_file():
        shared_instance = json.loads(inst_file.read_text())
    cases = []
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if not entry.name.endswith(".sql"):
            continue
        name = entry.name[: -len(".sql")]
        sql = entry.read_text()
        expected = (root / f"{name}.expected.json").read_text()
        db_file = root / f"{name}.db.json"
        instance = json.loads(db_file.read_text()) if db_file.is_file() else shared_instance
        cases.append(BenchmarkCase(suite, name, sql, instance, expected))
    return cases


def load_all() -> dict[str, list[BenchmarkCase]]:
    return {suite: load_suite(suite) for suite in SUITES}


@dataclass
class CaseResult:
    case: BenchmarkCase
    ok: bool
    stage_failures: list
    produced: str
    seconds: float


def run_case(case: BenchmarkCase, optimize: bool = True) -> CaseResult:
    """Compile once, check the expected output at every stage."""
    t0 = time.perf_counter()
    arts = P.compile_pipeline(case.sql, optimize=optimize)
    inst = Instance.from_json(arts.script.schema, case.instance_json)
    failures = []
    produced = ""
    for stage in P.STAGES:
        out = P.result_json(arts, inst, stage)
        if stage == "imp_ejson":
            produced = out
        if not P.results_match(out, case.expected_json):
            failures.append(stage)
    dt = time.perf_counter() - t0
    return CaseResult(case, not failures, failures, produced, dt)


def run_bench(optimize: bool = True, out=print) -> bool:
    """Run every suite at every stage; prints the valid/total table."""
    all_ok = True
    rows = []
    for suite, cases in load_all().items():
        valid = 0
        for case in cases:
            res = run_case(case, optimize)
            if res.ok:
                valid += 1
            else:
                all_ok = False
                out(f"  FAIL {suite}/{case.name}: stages {res.stage_failures}"
                    f" produced {res.produced}")
            out(f"  {suite}/{case.name}: {'ok' if res.ok else 'FAIL'}"
                f" ({res.seconds * 1000:.1f} ms)")
        rows.append((suite, valid, len(cases)))
    out("")
    out(f"{'suite':<14} valid/total")
    for suite, valid, total in rows:
        out(f"{suite:<14} {valid}/{total}")
    return all_ok


# ---------------------------------------------------------------------------
# Performance sanity
# ---------------------------------------------------------------------------

EMPLOYEES_DDL = "create table employees (name text, age double precision);\n"

PERF_QUERIES = (
    EMPLOYEES_DDL + "select avg(age) from employees where age > 32.0;",
    EMPLOYEES_DDL + "select age, count(*) as c from employees group by age;",
)


def employees_instance(n: int = 58800) -> dict:
    rows = []
    for i in range(n):
        rows.append({"name": f"emp{i}", "age": float(20 + (i * 7) % 50)})
    return {"employees": rows}


def run_perf(n: int = 58800, out=print) -> float:
    """Run the aggregate queries over an n-row table through the
    EJson-instantiated interpreter; returns total seconds."""
    db = employees_instance(n)
    total = 0.0
    for sql in PERF_QUERIES:
        arts = P.compile_pipeline(sql, optimize=True)
        inst = Instance.from_json(arts.script.schema, db)
        t0 = time.perf_counter()
        P.eval_stage(arts, "imp_ejson", inst)
        dt = time.perf_counter() - t0
        total += dt
        out(f"  {sql.splitlines()[-1]}  ({n} rows): {dt:.2f} s")
    return total
