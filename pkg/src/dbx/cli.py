"""The dbx command line: compile, run, difftest, bench.

Exit codes: 0 ok, 1 internal error, 2 user error (parse, unsupported
feature, name resolution, schema), 3 differential-test failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench as B
from . import imp as I
from . import lowering as L
from . import nrae, pipeline as P, sqlalg as A
from .data_model import DbxError, Instance
from .js_backend import emit_js
from .sql_front import SqlError

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2
EXIT_DIFF = 3

EMIT_SUFFIX = {
    "sqlalg": ".sqlalg",
    "nrae": ".nrae",
    "nnrc": ".nnrc",
    "nnrs": ".nnrs",
    "nnrsimp": ".nnrsimp",
    "imp": ".imp",
    "js": ".js",
}

RUN_STAGES = {
    "sqlalg": "sqlalg",
    "nrae": "nrae",
    "nnrc": "nnrc",
    "nnrs": "nnrs",
    "nnrsimp": "nnrsimp",
    "imp": "imp_ejson",
    "imp_data": "imp_data",
}


def _emit_text(arts: P.Artifacts, stage: str) -> str:
    if stage == "sqlalg":
        return A.print_query(arts.script.algebra) + "\n"
    if stage == "nrae":
        return nrae.print_nrae(arts.nrae_q) + "\n"
    if stage == "nnrc":
        return L.print_nnrc(arts.nnrc_stratified) + "\n"
    if stage == "nnrs":
        return L.print_nnrs(arts.nnrs_noshadow) + "\n"
    if stage == "nnrsimp":
        return L.print_nnrsimp(arts.nnrsimp) + "\n"
    if stage == "imp":
        return I.print_imp(arts.imp_ejson) + "\n"
    if stage == "js":
        return emit_js(arts.imp_ejson)
    raise ValueError(f"unknown emit stage {stage}")


def cmd_compile(args) -> int:
    path = Path(args.file)
    arts = P.compile_pipeline(path.read_text(), optimize=args.optimize)
    out_path = Path(args.output) if args.output else path.with_suffix(
        EMIT_SUFFIX[args.emit]
    )
    out_path.write_text(_emit_text(arts, args.emit))
    print(f"wrote {out_path}")
    if args.emit == "js":
        sidecar = out_path.with_suffix(".schema.json")
        sidecar.write_text(json.dumps(arts.script.schema.to_sidecar(), indent=1))
        print(f"wrote {sidecar}")
    return EXIT_OK


def cmd_run(args) -> int:
    arts = P.compile_pipeline(Path(args.file).read_text(), optimize=args.optimize)
    db_json = json.loads(Path(args.db).read_text())
    inst = Instance.from_json(arts.script.schema, db_json)
    print(P.result_json(arts, inst, RUN_STAGES[args.stage]))
    return EXIT_OK


def cmd_difftest(args) -> int:
    from .fuzz import run_difftest

    report = run_difftest(seed=args.seed, cases=args.cases, jobs=args.jobs)
    text = json.dumps(report, indent=1, default=str)
    if args.report:
        Path(args.report).write_text(text)
        print(f"wrote {args.report}")
    else:
        print(text)
    n_fail = len(report["failures"])
    print(f"difftest: {report['cases'] - n_fail}/{report['cases']} passed")
    return EXIT_DIFF if n_fail else EXIT_OK


def cmd_bench(args) -> int:
    ok = B.run_bench(optimize=args.optimize)
    if args.perf:
        total = B.run_perf(args.perf_rows)
        print(f"perf total: {total:.2f} s")
    return EXIT_OK if ok else EXIT_DIFF


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbx", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a .sql file to a pipeline stage")
    c.add_argument("file")
    c.add_argument("--emit", choices=sorted(EMIT_SUFFIX), default="js")
    c.add_argument("-O", "--optimize", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(fn=cmd_compile)

    r = sub.add_parser("run", help="compile and evaluate in-process")
    r.add_argument("file")
    r.add_argument("--db", required=True)
    r.add_argument("--stage", choices=sorted(RUN_STAGES), default="imp")
    r.add_argument("-O", "--optimize", action="store_true")
    r.set_defaults(fn=cmd_run)

    d = sub.add_parser("difftest", help="differential testing across all stages")
    d.add_argument("--seed", type=int, default=42)
    d.add_argument("--cases", type=int, default=1000)
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("--report")
    d.set_defaults(fn=cmd_difftest)

    b = sub.add_parser("bench", help="run the benchmark suites at every stage")
    b.add_argument("-O", "--optimize", action="store_true", default=True)
    b.add_argument("--perf", action="store_true", help="also run the timing sanity")
    b.add_argument("--perf-rows", type=int, default=58800)
    b.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (SqlError, DbxError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # compiler bug
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
