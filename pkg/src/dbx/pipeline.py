"""End-to-end composition of the compilation stages, the per-stage
evaluators, and result post-processing."""

from __future__ import annotations

import sys
from dataclasses import dataclass

# translated circuits multiply expression depth by a small constant, so
# long predicate chains overflow the default interpreter limit
if sys.getrecursionlimit() < 30000:
    sys.setrecursionlimit(30000)

from . import alg2nra, imp as I, lowering as L, nrae, sqlalg as A
from .data_model import (
    EArr,
    EJson,
    ENULL,
    EObj,
    Instance,
    InternalError,
    Rec,
    bag_to_data,
    data_to_ejson,
    ejson_bag_equal,
    ejson_to_text,
    instance_to_data,
)
from .sql_front import CompiledScript, compile_script

STAGES = (
    "sqlalg",
    "nrae",
    "nnrc",
    "nnrc_stratified",
    "nnrs",
    "nnrs_noshadow",
    "nnrsimp",
    "imp_data",
    "imp_ejson",
)

@dataclass
class Artifacts:
    algebra: A.Query
    schema: object
    script: CompiledScript | None
    nrae_q: nrae.NraQuery
    nnrc: L.Nnrc
    nnrc_stratified: L.Nnrc
    nnrs: L.NnrsProgram
    nnrs_noshadow: L.NnrsProgram
    nnrsimp: L.NnrsImpProgram
    imp_data: I.ImpFunction
    imp_ejson: I.ImpFunction


def lower_algebra(alg: A.Query, schema, optimize: bool = True) -> Artifacts:
    q = alg2nra.translate_query((), alg, schema)
    if optimize:
        q = nrae.optimize(q)
    nnrc = L.nnrc_of_query(q)
    strat = L.stratify(nnrc)
    if not L.is_stratified(strat):
        raise InternalError("stratification did not reach stratified form")
    nnrs = L.nnrc_to_nnrs(strat)
    L.check_nnrs(nnrs)
    noshadow = L.uncross_shadow(nnrs)
    L.check_cross_shadow_free(noshadow)
    nnrsimp = L.nnrs_to_nnrsimp(noshadow)
    L.check_nnrsimp(nnrsimp)
    imp_data = I.nnrsimp_to_imp_data(nnrsimp)
    I.check_imp(imp_data)
    imp_ejson = I.imp_data_to_imp_ejson(imp_data)
    I.check_imp(imp_ejson)
    return Artifacts(
        algebra=alg,
        schema=schema,
        script=None,
        nrae_q=q,
        nnrc=nnrc,
        nnrc_stratified=strat,
        nnrs=nnrs,
        nnrs_noshadow=noshadow,
        nnrsimp=nnrsimp,
        imp_data=imp_data,
        imp_ejson=imp_ejson,
    )


def compile_pipeline(sql_text: str, optimize: bool = True) -> Artifacts:
    cs = compile_script(sql_text)
    arts = lower_algebra(cs.algebra, cs.schema, optimize)
    arts.script = cs
    return arts


def eval_stage(arts: Artifacts, stage: str, inst: Instance):
    """Evaluate one stage; results are nested data except imp_ejson,
    which yields EJson."""
    db = instance_to_data(inst)
    if stage == "sqlalg":
        return bag_to_data(A.eval_query(arts.algebra, (), inst))
    if stage == "nrae":
        return nrae.eval_nrae(arts.nrae_q, Rec(()), db, db)
    if stage == "nnrc":
        return L.eval_nnrc(arts.nnrc, {L.DB_VAR: db})
    if stage == "nnrc_stratified":
        return L.eval_nnrc(arts.nnrc_stratified, {L.DB_VAR: db})
    if stage == "nnrs":
        return L.eval_nnrs_program(arts.nnrs, db)
    if stage == "nnrs_noshadow":
        return L.eval_nnrs_program(arts.nnrs_noshadow, db)
    if stage == "nnrsimp":
        return L.eval_nnrsimp_program(arts.nnrsimp, db)
    if stage == "imp_data":
        return I.eval_imp(arts.imp_data, I.DATA_INSTANTIATION, db)
    if stage == "imp_ejson":
        return I.eval_imp(arts.imp_ejson, I.EJSON_INSTANTIATION, data_to_ejson(db))
    raise InternalError(f"unknown stage {stage}")


def stage_disagreements(arts: Artifacts, inst: Instance) -> list[tuple[str, str]]:
    """Evaluate every stage and report adjacent pairs that disagree
    (bag-equality; the EJson stage compares through the encoding)."""
    reference = eval_stage(arts, "sqlalg", inst)
    results = {"sqlalg": reference}
    bad = []
    prev = "sqlalg"
    for stage in STAGES[1:-1]:
        results[stage] = eval_stage(arts, stage, inst)
        if not _data_bag_eq(results[prev], results[stage]):
            bad.append((prev, stage))
        prev = stage
    ejson = eval_stage(arts, "imp_ejson", inst)
    if not ejson_bag_equal(ejson, data_to_ejson(results[prev])):
        bad.append((prev, "imp_ejson"))
    return bad


def _data_bag_eq(d1, d2) -> bool:
    from .data_model import data_bag_equal

    return data_bag_equal(d1, d2)


# ---------------------------------------------------------------------------
# Result post-processing
# ---------------------------------------------------------------------------


def postprocess_ejson(e: EJson) -> EJson:
    """Unbox $left/$right wrappers in a result array, producing the
    plain JSON the runner prints."""
    if not isinstance(e, EArr):
        raise InternalError(f"result is not an array: {e!r}")
    rows = []
    for item in e:
        if not isinstance(item, EObj):
            raise InternalError(f"result row is not an object: {item!r}")
        fields = []
        for k, v in item.fields:
            fields.append((k, _unbox(v)))
        rows.append(EObj(fields))
    return EArr.of(rows)


def _unbox(v: EJson) -> EJson:
    if isinstance(v, EObj):
        if tuple(k for k, _ in v.fields) == ("$left",):
            return v.get("$left")
        if tuple(k for k, _ in v.fields) == ("$right",):
            return ENULL
    return v


def result_json(arts: Artifacts, inst: Instance, stage: str = "imp_ejson") -> str:
    out = eval_stage(arts, stage, inst)
    if not isinstance(out, EJson):
        out = data_to_ejson(out)
    return ejson_to_text(postprocess_ejson(out))


def results_match(produced_json: str, expected_json: str) -> bool:
    """Bag equality of JSON result texts with numeric comparison across
    integer/double spellings."""
    import json

    def canon_value(v):
        if isinstance(v, bool) or v is None or isinstance(v, str):
            return v
        if isinstance(v, (int, float)):
            return float(v)
        raise InternalError(f"unexpected value in result: {v!r}")

    def canon_rows(obj):
        assert isinstance(obj, list)
        rows = []
        for r in obj:
            assert isinstance(r, dict)
            rows.append(tuple(sorted((k, _key(canon_value(v))) for k, v in r.items())))
        return sorted(rows)

    def _key(v):
        if v is None:
            return (0, "")
        if isinstance(v, bool):
            return (1, v)
        if isinstance(v, float):
            return (2, v)
        return (3, v)

    return canon_rows(json.loads(produced_json)) == canon_rows(json.loads(expected_json))
