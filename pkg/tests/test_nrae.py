import random

import pytest

from dbx import nrae, ops
from dbx.data_model import Atom, Coll, Left, Rec, Right, UNIT, data_bag_equal
from dbx.fuzz import gen_data
from dbx.nrae import (
    Binary,
    Comp,
    CompEnv,
    Const,
    Either,
    EnvQ,
    In,
    Map,
    NraeError,
    Product,
    Select,
    Unary,
    desugar_group_by,
    eval_nrae,
    optimize,
    print_nrae,
)

from term_gen import eval_or_error, gen_term

EMPTY = Rec(())


def ev(q, env=EMPTY, d=UNIT, db=EMPTY):
    return eval_nrae(q, env, d, db)


def test_env_rule():
    rho = Rec([("x", Atom(1))])
    assert ev(EnvQ(), rho, Atom(2)) == rho


def test_map_over_constant_table():
    r = Coll([Rec([("a", Atom(1))]), Rec([("a", Atom(2))])])
    q = Map(Unary(ops.REC("x"), Unary(ops.DOT("a"), In())), Const(r))
    assert ev(q) == Coll([Rec([("x", Atom(1))]), Rec([("x", Atom(2))])])


def test_either_dispatch():
    q = Either(Unary(ops.REC("l"), In()), Unary(ops.REC("r"), In()))
    assert ev(q, EMPTY, Left(Atom(1))) == Rec([("l", Atom(1))])
    assert ev(q, EMPTY, Right(Atom(2))) == Rec([("r", Atom(2))])
    with pytest.raises(NraeError):
        ev(q, EMPTY, Atom(3))


def test_record_concat_product():
    q = Binary(ops.CONCAT, Const(Rec([("a", Atom(True))])), Const(Rec([("b", Atom(3))])))
    assert ev(q) == Rec([("a", Atom(True)), ("b", Atom(3))])
    # right operand wins on overlap
    q2 = Binary(
        ops.CONCAT, Const(Rec([("a", Atom(1))])), Const(Rec([("a", Atom(2))]))
    )
    assert ev(q2) == Rec([("a", Atom(2))])


def test_product_pairs_rows():
    p = Product(
        Const(Coll([Rec([("a", Atom(1))]), Rec([("a", Atom(2))])])),
        Const(Coll([Rec([("b", Atom(3))])])),
    )
    assert ev(p) == Coll(
        [Rec([("a", Atom(1)), ("b", Atom(3))]), Rec([("a", Atom(2)), ("b", Atom(3))])]
    )


def test_default_on_empty():
    q = nrae.Default(Const(Coll(())), Const(Atom(7)))
    assert ev(q) == Atom(7)
    q2 = nrae.Default(Const(Coll((Atom(1),))), Const(Atom(7)))
    assert ev(q2) == Coll((Atom(1),))


def test_dynamic_errors_carry_term():
    bad = Map(In(), Const(Atom(1)))
    with pytest.raises(NraeError) as exc:
        ev(bad)
    assert exc.value.term is bad


# group-by --------------------------------------------------------------------


def groups_of(coll):
    return {
        tuple(sorted((k, v) for k, v in r.fields if k != "g")): r.get("g")
        for r in coll.items
    }


def test_desugared_group_by_worked_example():
    d = Coll(
        [
            Rec([("x", Atom(1)), ("y", Atom(1))]),
            Rec([("x", Atom(1)), ("y", Atom(2))]),
            Rec([("x", Atom(2)), ("y", Atom(3))]),
        ]
    )
    q = desugar_group_by("g", ("x",), Const(d))
    out = ev(q)
    assert out == Coll(
        [
            Rec(
                [
                    ("x", Atom(1)),
                    (
                        "g",
                        Coll(
                            [
                                Rec([("x", Atom(1)), ("y", Atom(1))]),
                                Rec([("x", Atom(1)), ("y", Atom(2))]),
                            ]
                        ),
                    ),
                ]
            ),
            Rec(
                [
                    ("x", Atom(2)),
                    ("g", Coll([Rec([("x", Atom(2)), ("y", Atom(3))])])),
                ]
            ),
        ]
    )


def test_group_by_empty_and_identical():
    assert ev(desugar_group_by("g", ("a",), Const(Coll(())))) == Coll(())
    k = 4
    same = Coll([Rec([("a", Atom(5))])] * k)
    out = ev(desugar_group_by("g", ("a",), Const(same)))
    assert len(out.items) == 1
    assert len(out.items[0].get("g").items) == k


def rand_record_bag(rng):
    rows = []
    for _ in range(rng.randrange(6)):
        rows.append(
            Rec(
                [
                    ("a", Atom(rng.randint(0, 2))),
                    ("b", Atom(rng.randint(0, 2))),
                    ("c", rng.choice([Left(Atom(1)), Right(UNIT)])),
                ]
            )
        )
    return Coll(rows)


def test_builtin_group_by_matches_desugaring():
    rng = random.Random(11)
    for _ in range(300):
        bag = rand_record_bag(rng)
        attrs = rng.choice([("a",), ("b",), ("a", "b"), ("c",)])
        builtin = ev(Unary(ops.GROUP_BY("g", attrs), Const(bag)))
        desugared = ev(desugar_group_by("g", attrs, Const(bag)))
        assert builtin == desugared


# optimizer ---------------------------------------------------------------------


def test_either_over_left_rule():
    q1, q2 = Unary(ops.REC("l"), In()), Unary(ops.REC("r"), In())
    inner = Unary(ops.UMINUS, In())
    term = Comp(Either(q1, q2), Unary(ops.LEFT, inner))
    assert optimize(term) == Comp(q1, inner)
    term_r = Comp(Either(q1, q2), Unary(ops.RIGHT, inner))
    assert optimize(term_r) == Comp(q2, inner)
    const_form = Comp(Either(q1, q2), Const(Left(Atom(1))))
    assert optimize(const_form) == Comp(q1, Const(Atom(1)))


def test_identity_rules():
    q = Unary(ops.COUNT, In())
    assert optimize(Comp(q, In())) == q
    assert optimize(Comp(In(), q)) == q
    assert optimize(Map(In(), q)) == q
    assert optimize(Select(Const(Atom(True)), q)) == q
    assert optimize(Unary(ops.FLATTEN, Unary(ops.COLL, q))) == q


def test_rewrites_preserve_semantics_on_fuzzed_terms():
    rng = random.Random(23)
    checked = 0
    for _ in range(600):
        term = gen_term(rng, 3)
        env = gen_data(rng, 2)
        d = gen_data(rng, 2)
        db = Rec(())
        base = eval_or_error(term, env, d, db)
        if base[0] != "ok":
            continue
        opt = optimize(term)
        got = eval_or_error(opt, env, d, db)
        assert got == base, print_nrae(term)
        checked += 1
    assert checked > 100


def test_print_nrae_smoke():
    r = Coll([Rec([("a", Atom(1))])])
    q = Map(Unary(ops.REC("x"), Unary(ops.DOT("a"), In())), Const(r))
    s = print_nrae(q)
    assert "chi<" in s and "In.a" in s


def test_optimizer_equivalent_on_benchmark_queries():
    from dbx import alg2nra
    from dbx.bench import load_all
    from dbx.data_model import Instance, Rec, data_bag_equal, instance_to_data
    from dbx.sql_front import compile_script

    for suite, cases in load_all().items():
        for case in cases:
            cs = compile_script(case.sql)
            inst = Instance.from_json(cs.schema, case.instance_json)
            db = instance_to_data(inst)
            q = alg2nra.translate_query((), cs.algebra, cs.schema)
            base = eval_nrae(q, Rec(()), db, db)
            opt = eval_nrae(optimize(q), Rec(()), db, db)
            assert data_bag_equal(base, opt), f"{suite}/{case.name}"
