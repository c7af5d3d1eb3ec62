"""Translation from the relational algebra to the nested algebra.

Null handling: values are boxed as left(v) / right(unit), and the
three-valued logic rides the same tagging (left true / left false /
right unit).  Environment handling: the algebra's implicit slice stack
becomes an explicit linked record {slice: ..., tail: ...} built by the
push_one / push_bag administrative steps; attribute access compiles to
a slice lookup at a statically computed depth.
"""

from __future__ import annotations

from . import ops, sqlalg as A
from .data_model import (
    Atom,
    Coll,
    FALSE3,
    InternalError,
    NraData,
    Rec,
    TRUE3,
    UNKNOWN3,
    row_to_data,
    value_to_data,
)
from .nrae import (
    Binary,
    Comp,
    CompEnv,
    Const,
    Db,
    Default,
    Either,
    EnvQ,
    In,
    Map,
    NraQuery,
    Product,
    Select,
    Unary,
)
from .sqlalg import AEnv, StaticSlice, find_eval_env_static, wf_query

GROUP_LABEL = "$group"

IN = In()
ENV = EnvQ()


def dot(label: str, q: NraQuery) -> NraQuery:
    return Unary(ops.DOT(label), q)


def rec(label: str, q: NraQuery) -> NraQuery:
    return Unary(ops.REC(label), q)


def concat(a: NraQuery, b: NraQuery) -> NraQuery:
    return Binary(ops.CONCAT, a, b)


def mk_record(fields) -> NraQuery:
    out = None
    for label, q in fields:
        piece = rec(label, q)
        out = piece if out is None else concat(out, piece)
    if out is None:
        return Const(Rec(()))
    return out


# the administrative steps extending the environment stack
PUSH_ONE = concat(rec("slice", Unary(ops.COLL, IN)), rec("tail", ENV))
PUSH_BAG = concat(rec("slice", IN), rec("tail", ENV))

# boxed-3VL observers
IS_TRUE_B = Either(IN, Const(Atom(False)))
IS_FALSE_B = Either(Unary(ops.NOT, IN), Const(Atom(False)))
IS_UNKNOWN_B = Either(Const(Atom(False)), Const(Atom(True)))
IS_LEFT_B = Either(Const(Atom(True)), Const(Atom(False)))
UNBOX = Either(IN, IN)


def if_q(cond: NraQuery, then_q: NraQuery, else_q: NraQuery) -> NraQuery:
    """A conditional from selection and default: branches must not read
    the current input (all translated terms qualify)."""
    hit = Map(then_q, Select(IN, Unary(ops.COLL, cond)))
    miss = Map(else_q, Unary(ops.COLL, Const(Atom(True))))
    return Unary(ops.FIRST, Default(hit, miss))


def not_b(q: NraQuery) -> NraQuery:
    return Comp(Either(Unary(ops.LEFT, Unary(ops.NOT, IN)), Const(UNKNOWN3)), q)


def and_b(b1: NraQuery, b2: NraQuery) -> NraQuery:
    on_left = if_q(IN, dot("$v2", ENV), Const(FALSE3))
    on_right = if_q(
        Comp(IS_FALSE_B, dot("$v2", ENV)), Const(FALSE3), Const(UNKNOWN3)
    )
    body = Comp(Either(on_left, on_right), dot("$v1", ENV))
    return CompEnv(body, concat(rec("$v1", b1), rec("$v2", b2)))


def or_b(b1: NraQuery, b2: NraQuery) -> NraQuery:
    on_left = if_q(IN, Const(TRUE3), dot("$v2", ENV))
    on_right = if_q(
        Comp(IS_TRUE_B, dot("$v2", ENV)), Const(TRUE3), Const(UNKNOWN3)
    )
    body = Comp(Either(on_left, on_right), dot("$v1", ENV))
    return CompEnv(body, concat(rec("$v1", b1), rec("$v2", b2)))


def lift2(mk, c1: NraQuery, c2: NraQuery) -> NraQuery:
    """Unbox two nullable operands in sequence; right(unit) anywhere is
    absorbing.  mk(lhs, rhs) builds the boxed result from the unboxed
    payload queries."""
    step2 = CompEnv(
        Comp(Either(mk(dot("$w1", ENV), IN), Const(UNKNOWN3)), dot("$v2", ENV)),
        concat(rec("$w1", IN), ENV),
    )
    return CompEnv(
        Comp(Either(step2, Const(UNKNOWN3)), dot("$v1", ENV)),
        concat(rec("$v1", c1), rec("$v2", c2)),
    )


def lift1(mk, c: NraQuery) -> NraQuery:
    return Comp(Either(mk(IN), Const(UNKNOWN3)), c)


def pred_circuit(op: str, c1: NraQuery, c2: NraQuery) -> NraQuery:
    cmp_op = ops.CMP_BY_PRED[op]

    def mk(lhs, rhs):
        return Unary(ops.LEFT, Binary(cmp_op, lhs, rhs))

    return lift2(mk, c1, c2)


def fn_circuit(fn: str, args: list[NraQuery]) -> NraQuery:
    if fn == "u-":
        return lift1(lambda v: Unary(ops.LEFT, Unary(ops.UMINUS, v)), args[0])
    if fn == "/":
        # the branches of if_q lose the current input, so the divisor is
        # stashed in the environment before testing it for zero
        def mk_div(lhs, rhs):
            return CompEnv(
                if_q(
                    Binary(ops.EQ_SQL, dot("$w2", ENV), Const(Atom(0))),
                    Const(UNKNOWN3),
                    Unary(
                        ops.LEFT,
                        Binary(ops.DIV, dot("$w1", ENV), dot("$w2", ENV)),
                    ),
                ),
                concat(rec("$w2", rhs), ENV),
            )

        return lift2(mk_div, args[0], args[1])
    raw = ops.ARITH_BY_FN[fn]

    def mk(lhs, rhs):
        return Unary(ops.LEFT, Binary(raw, lhs, rhs))

    return lift2(mk, args[0], args[1])


def _count_of(q: NraQuery) -> NraQuery:
    return Unary(ops.COUNT, q)


def _nonzero(q: NraQuery) -> NraQuery:
    return Binary(ops.GT, _count_of(q), Const(Atom(0)))


def fold3_and(bag3: NraQuery) -> NraQuery:
    has_false = _nonzero(Select(IS_FALSE_B, dot("$bag", ENV)))
    has_unknown = _nonzero(Select(IS_UNKNOWN_B, dot("$bag", ENV)))
    body = if_q(
        has_false,
        Const(FALSE3),
        if_q(has_unknown, Const(UNKNOWN3), Const(TRUE3)),
    )
    return CompEnv(body, concat(rec("$bag", bag3), ENV))


def fold3_or(bag3: NraQuery) -> NraQuery:
    has_true = _nonzero(Select(IS_TRUE_B, dot("$bag", ENV)))
    has_unknown = _nonzero(Select(IS_UNKNOWN_B, dot("$bag", ENV)))
    body = if_q(
        has_true,
        Const(TRUE3),
        if_q(has_unknown, Const(UNKNOWN3), Const(FALSE3)),
    )
    return CompEnv(body, concat(rec("$bag", bag3), ENV))


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


def agg_fold(fn: str, bag3: NraQuery) -> NraQuery:
    """Fold a bag of boxed values; sum/avg/min/max skip the right-tagged
    (null) elements, count counts the non-null ones, count(*) all."""
    vals = dot("$vals", ENV)
    if fn == "count_star":
        stash = bag3
        body = Unary(ops.LEFT, _count_of(vals))
    elif fn == "count":
        stash = Select(IS_LEFT_B, bag3)
        body = Unary(ops.LEFT, _count_of(vals))
    else:
        stash = Map(UNBOX, Select(IS_LEFT_B, bag3))
        empty = Binary(ops.EQ_SQL, _count_of(vals), Const(Atom(0)))
        if fn == "sum":
            full = Unary(ops.LEFT, Unary(ops.SUM, vals))
        elif fn == "min":
            full = Unary(ops.LEFT, Unary(ops.MIN, vals))
        elif fn == "max":
            full = Unary(ops.LEFT, Unary(ops.MAX, vals))
        elif fn == "avg":
            full = Unary(
                ops.LEFT,
                Binary(
                    ops.DIV,
                    Unary(ops.TO_FLOAT, Unary(ops.SUM, vals)),
                    Unary(ops.TO_FLOAT, _count_of(vals)),
                ),
            )
        else:
            raise InternalError(f"unknown aggregate {fn}")
        body = if_q(empty, Const(UNKNOWN3), full)
    return CompEnv(body, concat(rec("$vals", stash), ENV))


def remove_slices(k: int) -> NraQuery:
    out: NraQuery = ENV
    for _ in range(k):
        out = dot("tail", out)
    return out


def translate_expr(aenv: AEnv, e: A.Expr, schema) -> NraQuery:
    if isinstance(e, A.Const):
        return Const(value_to_data(e.value))
    if isinstance(e, A.Attr):
        if not aenv:
            raise InternalError(f"attribute {e.name} escaped the environment")
        if e.name in aenv[0].attrs:
            return dot(e.name, Unary(ops.FIRST, dot("slice", ENV)))
        return CompEnv(translate_expr(aenv[1:], e, schema), dot("tail", ENV))
    if isinstance(e, A.Fn):
        return fn_circuit(e.op, [translate_expr(aenv, a, schema) for a in e.args])
    if isinstance(e, A.Agg):
        suffix = find_eval_env_static(aenv, e.arg)
        if suffix is None or not suffix:
            raise InternalError(f"aggregate argument {e.arg} resolves nowhere")
        k = len(aenv) - len(suffix)
        arg_t = translate_expr(suffix, e.arg, schema)
        rebuild = concat(
            rec("slice", Unary(ops.COLL, IN)), rec("tail", dot("tail", ENV))
        )
        bag3 = Map(CompEnv(arg_t, rebuild), dot("slice", ENV))
        folded = agg_fold(e.fn, bag3)
        if k == 0:
            return folded
        return CompEnv(folded, remove_slices(k))
    raise InternalError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


def translate_formula(aenv: AEnv, f: A.Formula, schema) -> NraQuery:
    if isinstance(f, A.FTrue):
        return Const(TRUE3)
    if isinstance(f, A.FAnd):
        return and_b(
            translate_formula(aenv, f.left, schema),
            translate_formula(aenv, f.right, schema),
        )
    if isinstance(f, A.FOr):
        return or_b(
            translate_formula(aenv, f.left, schema),
            translate_formula(aenv, f.right, schema),
        )
    if isinstance(f, A.FNot):
        return not_b(translate_formula(aenv, f.arg, schema))
    if isinstance(f, A.FPred):
        return pred_circuit(
            f.op,
            translate_expr(aenv, f.left, schema),
            translate_expr(aenv, f.right, schema),
        )
    if isinstance(f, A.FExists):
        return Unary(
            ops.LEFT, _nonzero(translate_query(aenv, f.query, schema))
        )
    if isinstance(f, A.FQuant):
        sort = wf_query(f.query, aenv, schema)
        (attr,) = tuple(sort)
        per_tuple = pred_circuit(
            f.op, translate_expr(aenv, f.expr, schema), dot(attr, IN)
        )
        bag3 = Map(per_tuple, translate_query(aenv, f.query, schema))
        return fold3_and(bag3) if f.kind == "all" else fold3_or(bag3)
    if isinstance(f, A.FIn):
        sel = mk_record(
            (name, translate_expr(aenv, e, schema)) for e, name in f.items
        )
        match_q = None
        for _, name in f.items:
            eq_q = pred_circuit("=", dot(name, dot("$sel", ENV)), dot(name, IN))
            match_q = eq_q if match_q is None else and_b(match_q, eq_q)
        bag3 = Map(match_q, translate_query(aenv, f.query, schema))
        return CompEnv(fold3_or(bag3), concat(rec("$sel", sel), ENV))
    raise InternalError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

_SETOP_OPS = {"union": ops.UNION, "intersect": ops.INTER, "except": ops.MINUS}


def t_sel(aenv: AEnv, items, schema) -> NraQuery:
    return mk_record((name, translate_expr(aenv, e, schema)) for e, name in items)


def translate_query(aenv: AEnv, q: A.Query, schema) -> NraQuery:
    if isinstance(q, A.QEmpty):
        return Const(Coll(()))
    if isinstance(q, A.QTable):
        return dot(q.name, Db())
    if isinstance(q, A.QSetOp):
        return Binary(
            _SETOP_OPS[q.kind],
            translate_query(aenv, q.left, schema),
            translate_query(aenv, q.right, schema),
        )
    if isinstance(q, A.QJoin):
        # sound as a plain product: attribute names are distinct
        return Product(
            translate_query(aenv, q.left, schema),
            translate_query(aenv, q.right, schema),
        )
    if isinstance(q, A.QSelect):
        if isinstance(q.formula, A.FTrue):
            return translate_query(aenv, q.query, schema)
        sort = wf_query(q.query, aenv, schema)
        inner = (StaticSlice(sort, (), False),) + aenv
        cond = Comp(
            IS_TRUE_B, CompEnv(translate_formula(inner, q.formula, schema), PUSH_ONE)
        )
        return Select(cond, translate_query(aenv, q.query, schema))
    if isinstance(q, A.QProject):
        sort = wf_query(q.query, aenv, schema)
        inner = (StaticSlice(sort, (), False),) + aenv
        body = CompEnv(t_sel(inner, q.items, schema), PUSH_ONE)
        return Map(body, translate_query(aenv, q.query, schema))
    if isinstance(q, A.QGamma):
        sort = wf_query(q.query, aenv, schema)
        labels = []
        for k in q.keys:
            if not isinstance(k, A.Attr):
                raise InternalError("grouping expressions must be attribute names")
            labels.append(k.name)
        inner = (StaticSlice(sort, q.keys, True),) + aenv
        groups = Map(
            dot(GROUP_LABEL, IN),
            Unary(
                ops.GROUP_BY(GROUP_LABEL, tuple(labels)),
                translate_query(aenv, q.query, schema),
            ),
        )
        if isinstance(q.having, A.FTrue):
            filtered = groups
        else:
            cond = Comp(
                IS_TRUE_B,
                CompEnv(translate_formula(inner, q.having, schema), PUSH_BAG),
            )
            filtered = Select(cond, groups)
        return Map(CompEnv(t_sel(inner, q.items, schema), PUSH_BAG), filtered)
    raise InternalError(f"not a query: {q!r}")


# ---------------------------------------------------------------------------
# Environment erasures (test-harness side of the translation theorems)
# ---------------------------------------------------------------------------


def static_of(env: A.Env) -> AEnv:
    return A.static_of_env(env)


def runtime_of(env: A.Env) -> NraData:
    """Encode a runtime environment as the slice/tail record chain."""
    if not env:
        return Rec(())
    s = env[0]
    bag = Coll(row_to_data(r) for r in s.rows)
    return Rec((("slice", bag), ("tail", runtime_of(env[1:]))))


def bool3_to_data(b: A.Bool3) -> NraData:
    if b is A.T3:
        return TRUE3
    if b is A.F3:
        return FALSE3
    return UNKNOWN3
