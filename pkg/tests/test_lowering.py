import random

import pytest

from dbx import lowering as L, nrae, ops
from dbx.data_model import Atom, Coll, Left, Rec, Right, UNIT, data_bag_equal
from dbx.fuzz import gen_data
from dbx.lowering import (
    EMPTY_BAG,
    Gen,
    NBinop,
    NConst,
    NEither,
    NFor,
    NIf,
    NLet,
    NUnop,
    NVar,
    SAssign,
    SEither,
    SFor,
    SLetMut,
    SLetMutColl,
    SPush,
    SSeq,
    NnrsProgram,
    check_cross_shadow_free,
    check_nnrs,
    check_nnrsimp,
    eval_nnrc,
    eval_nnrs_program,
    eval_nnrsimp_program,
    is_basic,
    is_stratified,
    nnrc_to_nnrs,
    nnrs_to_nnrsimp,
    nrae_to_nnrc,
    print_nnrs,
    stratify,
    uncross_shadow,
)

from term_gen import gen_term


def nnrc_of(q):
    return L.nnrc_of_query(q)


def run_nnrc(q, db=Rec(())):
    return eval_nnrc(nnrc_of(q), {L.DB_VAR: db})


# nrae -> nnrc ------------------------------------------------------------------


def test_in_translates_to_variable():
    e = nrae_to_nnrc(nrae.In(), "v", "e", Gen("x"))
    assert e == NVar("v")


def test_map_becomes_for():
    r = Coll([Rec([("a", Atom(1))]), Rec([("a", Atom(2))])])
    q = nrae.Map(nrae.Unary(ops.REC("x"), nrae.Unary(ops.DOT("a"), nrae.In())), nrae.Const(r))
    out = run_nnrc(q)
    assert out == Coll([Rec([("x", Atom(1))]), Rec([("x", Atom(2))])])
    e = nrae_to_nnrc(q, "v", "e", Gen("x"))
    assert isinstance(e, NFor)


def test_comp_env_becomes_let():
    q = nrae.CompEnv(nrae.EnvQ(), nrae.Const(Atom(5)))
    e = nrae_to_nnrc(q, "v", "e", Gen("x"))
    assert isinstance(e, NLet)
    assert run_nnrc(q) == Atom(5)


def test_nnrc_agrees_with_nrae_on_fuzzed_terms():
    rng = random.Random(99)
    agree = 0
    for _ in range(400):
        term = gen_term(rng, 3)
        env = gen_data(rng, 2)
        d = gen_data(rng, 2)
        db = Rec(())
        try:
            want = nrae.eval_nrae(term, env, d, db)
        except nrae.NraeError:
            continue
        gen = Gen("x")
        e = nrae_to_nnrc(term, "$in", "$env", gen)
        got = eval_nnrc(e, {"$in": d, "$env": env, L.DB_VAR: db})
        assert got == want
        agree += 1
    assert agree > 100


# stratification ----------------------------------------------------------------


def test_stratify_hoists_complex_op_args():
    y = NVar("y")
    comp = NFor("x", y, NBinop(ops.ADD, NVar("x"), NConst(Atom(3))))
    e = NUnop(ops.COUNT, comp)
    out = stratify(e)
    assert out == NLet("t$0", comp, NUnop(ops.COUNT, NVar("t$0")))
    assert is_stratified(out)
    env = {"y": Coll([Atom(1), Atom(2), Atom(3)])}
    assert eval_nnrc(out, env) == eval_nnrc(e, env) == Atom(3)


def test_stratify_idempotent_and_preserves_semantics():
    rng = random.Random(7)
    for _ in range(300):
        term = gen_term(rng, 3)
        e = nrae_to_nnrc(term, "$in", "$env", Gen("x"))
        s = stratify(e)
        assert is_stratified(s)
        assert stratify(s) == s
        env = {"$in": gen_data(rng, 2), "$env": gen_data(rng, 2), L.DB_VAR: Rec(())}
        try:
            want = eval_nnrc(e, dict(env))
        except L.NnrcError:
            continue
        assert eval_nnrc(s, dict(env)) == want


def test_two_hoists_left_to_right():
    loop1 = NFor("x", NVar("y"), NVar("x"))
    loop2 = NFor("z", NVar("y"), NVar("z"))
    e = NBinop(ops.UNION, loop1, loop2)
    out = stratify(e)
    assert out == NLet(
        "t$0",
        loop1,
        NLet("t$1", loop2, NBinop(ops.UNION, NVar("t$0"), NVar("t$1"))),
    )


# nnrc -> nnrs -------------------------------------------------------------------


def test_let_for_becomes_let_mut_coll():
    # let t1 = {(x+3) | x in y} in length(t1)
    e = NLet(
        "t1",
        NFor("x", NVar(L.DB_VAR), NBinop(ops.ADD, NVar("x"), NConst(Atom(3)))),
        NUnop(ops.COUNT, NVar("t1")),
    )
    p = nnrc_to_nnrs(e)
    check_nnrs(p)
    body = p.body
    assert isinstance(body, SLetMutColl) and body.var == "t1"
    assert isinstance(body.first, SFor)
    assert isinstance(body.first.body, SPush)
    assert eval_nnrs_program(p, Coll([Atom(1), Atom(2), Atom(3)])) == Atom(3)
    printed = print_nnrs(p)
    assert "letMutColl t1 from {" in printed
    assert "push(t1," in printed


def test_constant_expression_single_assignment():
    p = nnrc_to_nnrs(NConst(Atom(1)))
    assert p.body == SAssign(L.RET_VAR, NConst(Atom(1)))


def test_either_match_assigns_in_both_branches():
    e = NEither(NVar(L.DB_VAR), "l", NVar("l"), "r", NConst(Atom(0)))
    p = nnrc_to_nnrs(e)
    check_nnrs(p)
    assert isinstance(p.body, SEither)
    assert eval_nnrs_program(p, Left(Atom(7))) == Atom(7)
    assert eval_nnrs_program(p, Right(Atom(1))) == Atom(0)


def fuzz_programs(n, seed=3):
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        term = gen_term(rng, 3)
        e = L.nnrc_of_query(term)
        out.append((term, e, gen_data(rng, 2)))
    return out


def test_nnrs_agrees_with_nnrc():
    for term, e, db in fuzz_programs(300):
        try:
            want = eval_nnrc(e, {L.DB_VAR: db})
        except L.NnrcError:
            continue
        p = nnrc_to_nnrs(stratify(e))
        check_nnrs(p)
        assert eval_nnrs_program(p, db) == want


# uncross shadow -----------------------------------------------------------------


def test_rename_on_cross_namespace_conflict():
    # immutable x (from a for) while a mutable collection x is pushed
    body = SLetMut(
        "x",
        SAssign("x", NConst(Atom(1))),
        SLetMutColl(
            "x",
            SFor("i", NVar(L.DB_VAR), SPush("x", NVar("i"))),
            SAssign(L.RET_VAR, NVar("x")),
        ),
    )
    p = NnrsProgram(body, L.RET_VAR)
    check_nnrs(p)
    with pytest.raises(L.LoweringError):
        check_cross_shadow_free(p)
    fixed = uncross_shadow(p)
    check_cross_shadow_free(fixed)
    assert isinstance(fixed.body.second, SLetMutColl)
    assert fixed.body.second.var == "x$0"
    db = Coll([Atom(1), Atom(2)])
    assert eval_nnrs_program(p, db) == eval_nnrs_program(fixed, db) == db
    # idempotent
    assert uncross_shadow(fixed) == fixed


def test_already_free_program_unchanged():
    for term, e, db in fuzz_programs(100, seed=4):
        p = nnrc_to_nnrs(stratify(e))
        fixed = uncross_shadow(p)
        assert fixed == p  # pipeline names are unique by construction
        check_cross_shadow_free(fixed)


def test_three_way_conflict_two_renames():
    body = SLetMut(
        "x",
        SAssign("x", NConst(Atom(1))),
        SLetMutColl(
            "x",
            SFor("x", NVar(L.DB_VAR), SPush("x", NVar("x"))),
            SAssign(L.RET_VAR, NVar("x")),
        ),
    )
    p = NnrsProgram(body, L.RET_VAR)
    fixed = uncross_shadow(p)
    check_cross_shadow_free(fixed)
    db = Coll([Atom(5), Atom(6)])
    assert eval_nnrs_program(p, db) == eval_nnrs_program(fixed, db)


# nnrs -> nnrsimp ----------------------------------------------------------------


def test_let_mut_coll_lowering_shape():
    e = NLet(
        "t1",
        NFor("x", NVar(L.DB_VAR), NBinop(ops.ADD, NVar("x"), NConst(Atom(3)))),
        NUnop(ops.COUNT, NVar("t1")),
    )
    p = nnrs_to_nnrsimp(uncross_shadow(nnrc_to_nnrs(stratify(e))))
    check_nnrsimp(p)
    assert eval_nnrsimp_program(p, Coll([Atom(1), Atom(2), Atom(3)])) == Atom(3)
    printed = L.print_nnrsimp(p)
    assert "var t1 = [];" in printed


def test_nested_product_pushes_row_major():
    q = nrae.Product(
        nrae.Const(Coll([Rec([("a", Atom(1))]), Rec([("a", Atom(2))])])),
        nrae.Const(Coll([Rec([("b", Atom(1))]), Rec([("b", Atom(2))])])),
    )
    e = L.nnrc_of_query(q)
    p = nnrs_to_nnrsimp(uncross_shadow(nnrc_to_nnrs(stratify(e))))
    out = eval_nnrsimp_program(p, Rec(()))
    pairs = [(r.get("a").value, r.get("b").value) for r in out.items]
    assert pairs == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_nnrsimp_agrees_with_nnrs():
    for term, e, db in fuzz_programs(300, seed=8):
        try:
            want = eval_nnrc(e, {L.DB_VAR: db})
        except L.NnrcError:
            continue
        p = nnrc_to_nnrs(stratify(e))
        imp = nnrs_to_nnrsimp(uncross_shadow(p))
        check_nnrsimp(imp)
        assert eval_nnrsimp_program(imp, db) == want
