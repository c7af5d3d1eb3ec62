"""Random generators and the differential-test harness core.

Queries are generated directly at the algebra level, well-formed by
construction, over small random schemas and instances.  Doubles are
restricted to small dyadic rationals so deterministic folds cannot be
confused with rounding noise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import sqlalg as A
from .data_model import (
    Atom,
    Bag,
    Coll,
    Instance,
    Left,
    NraData,
    Rec,
    Right,
    Row,
    Schema,
    TableSchema,
    UNIT,
)

NULL_RATE = 0.25


# ---------------------------------------------------------------------------
# Nested-data generator (for encoding round-trip and injectivity checks)
# ---------------------------------------------------------------------------


def gen_atom(rng: random.Random):
    k = rng.randrange(4)
    if k == 0:
        return Atom(rng.choice([True, False]))
    if k == 1:
        return Atom(rng.randint(-(2**64), 2**64))
    if k == 2:
        return Atom(rng.randint(-64, 64) / 8.0)
    return Atom("".join(rng.choice("abxy$.") for _ in range(rng.randrange(4))))


def gen_data(rng: random.Random, depth: int = 5) -> NraData:
    if depth <= 0 or rng.random() < 0.3:
        return rng.choice([UNIT, gen_atom(rng), gen_atom(rng)])
    k = rng.randrange(4)
    if k == 0:
        return Left(gen_data(rng, depth - 1))
    if k == 1:
        return Right(gen_data(rng, depth - 1))
    if k == 2:
        n = rng.randrange(3)
        labels = rng.sample(["a", "b", "c", "d.x", "e$1"], n)
        return Rec((l, gen_data(rng, depth - 1)) for l in labels)
    return Coll(gen_data(rng, depth - 1) for _ in range(rng.randrange(3)))


# ---------------------------------------------------------------------------
# Schema / instance / value generators
# ---------------------------------------------------------------------------

_COLUMN_POOL = ("a", "b", "c", "d")
_TYPES = ("int", "double precision", "text", "boolean")


def gen_schema(rng: random.Random) -> Schema:
    tables = []
    for ti in range(rng.randint(1, 3)):
        cols = tuple(
            (c, rng.choice(_TYPES))
            for c in _COLUMN_POOL[: rng.randint(1, 3)]
        )
        tables.append(TableSchema(f"r{ti}", cols))
    return Schema(tables)


def gen_value(rng: random.Random, ty: str):
    if rng.random() < NULL_RATE:
        return None
    if ty == "int":
        return rng.randint(-5, 5)
    if ty == "double precision":
        return rng.randint(-16, 16) / 8.0
    if ty == "text":
        return rng.choice(["", "a", "b", "ab", "xy"])
    return rng.choice([True, False])


def gen_instance(rng: random.Random, schema: Schema) -> Instance:
    tables = {}
    for name, ts in schema.tables.items():
        rows = []
        for _ in range(rng.randint(0, 4)):
            rows.append(
                Row(
                    (f"{name}.{c}", gen_value(rng, ty))
                    for c, ty in ts.columns
                )
            )
        tables[name] = Bag(rows, frozenset(ts.qualified()))
    return Instance(schema, tables)


# ---------------------------------------------------------------------------
# Query generator
# ---------------------------------------------------------------------------


@dataclass
class Scope:
    """Static view of one environment slice for generation purposes."""

    attrs: dict  # attr name -> column type
    keys: tuple  # grouping key attr names (usable for plain reads)
    is_group: bool


@dataclass
class GenCtx:
    rng: random.Random
    schema: Schema
    scopes: list = field(default_factory=list)  # innermost first
    counter: int = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"q{self.counter}"


def _readable_attrs(ctx: GenCtx, ty: str | None = None):
    """Attrs legal as plain expression leaves (grouping keys only, in
    group scopes)."""
    out = []
    for s in ctx.scopes:
        for a, t in s.attrs.items():
            if s.is_group and a not in s.keys:
                continue
            if ty is None or t == ty:
                out.append((a, t))
    return out


def gen_scalar(ctx: GenCtx, ty: str, depth: int) -> A.Expr:
    rng = ctx.rng
    candidates = _readable_attrs(ctx, ty)
    if depth <= 0 or rng.random() < 0.4 or not candidates:
        if candidates and rng.random() < 0.6:
            return A.Attr(rng.choice(candidates)[0])
        return A.Const(gen_value(rng, ty))
    if ty in ("int", "double precision") and rng.random() < 0.5:
        op = rng.choice(["+", "-", "*"])
        return A.Fn(op, (gen_scalar(ctx, ty, depth - 1), gen_scalar(ctx, ty, depth - 1)))
    if ty == "text" and rng.random() < 0.3:
        return A.Fn("||", (gen_scalar(ctx, ty, depth - 1), gen_scalar(ctx, ty, depth - 1)))
    return A.Attr(rng.choice(candidates)[0])


def gen_agg(ctx: GenCtx, scope_attrs: dict, ty: str, depth: int) -> A.Expr:
    """An aggregate whose argument reads only the given slice's attrs."""
    rng = ctx.rng
    if ty != "text" and rng.random() < 0.15:
        return A.Agg("count_star", A.Const(1))
    arg_candidates = [(a, t) for a, t in scope_attrs.items() if t == ty]
    if not arg_candidates:
        return A.Agg("count_star", A.Const(1))
    a, _ = rng.choice(arg_candidates)
    arg: A.Expr = A.Attr(a)
    if rng.random() < 0.5 and ty in ("int", "double precision"):
        one = 1 if ty == "int" else 1.0
        zero = 0 if ty == "int" else 0.0
        arg = A.Fn("+", (A.Const(one), A.Fn("*", (A.Const(zero), arg))))
    fn = rng.choice(["min", "max"] if ty == "text" else ["sum", "min", "max", "count"])
    return A.Agg(fn, arg)


def agg_result_type(e: A.Expr, arg_ty: str) -> str:
    if not isinstance(e, A.Agg):
        return arg_ty
    if e.fn in ("count", "count_star"):
        return "int"
    if e.fn == "avg":
        return "double precision"
    return arg_ty


def gen_formula(ctx: GenCtx, depth: int, allow_agg_scope: dict | None = None) -> A.Formula:
    rng = ctx.rng
    r = rng.random()
    if depth <= 0:
        r = max(r, 0.75)
    if r < 0.15:
        return A.FAnd(gen_formula(ctx, depth - 1, allow_agg_scope), gen_formula(ctx, depth - 1, allow_agg_scope))
    if r < 0.25:
        return A.FOr(gen_formula(ctx, depth - 1, allow_agg_scope), gen_formula(ctx, depth - 1, allow_agg_scope))
    if r < 0.33:
        return A.FNot(gen_formula(ctx, depth - 1, allow_agg_scope))
    if r < 0.45 and depth > 0:
        sub = gen_query(ctx, depth - 1)
        return A.FExists(sub.query)
    if r < 0.55 and depth > 0:
        sub = gen_query(ctx, depth - 1, want_single=True)
        ty = sub.types[sub.names[0]]
        e = gen_scalar(ctx, ty, 1)
        if (
            allow_agg_scope is not None
            and ty in ("int", "double precision")
            and rng.random() < 0.4
        ):
            e = gen_agg(ctx, allow_agg_scope, ty, depth)
        kind = rng.choice(["all", "any"])
        op = rng.choice(A.PRED_OPS)
        return A.FQuant(op, kind, e, sub.query)
    if r < 0.65 and depth > 0:
        sub = gen_query(ctx, depth - 1, want_single=rng.random() < 0.7)
        items = tuple(
            (gen_scalar(ctx, sub.types[n], 1), n) for n in sub.names
        )
        f: A.Formula = A.FIn(items, sub.query)
        if rng.random() < 0.5:
            f = A.FNot(f)
        return f
    ty = rng.choice(["int", "double precision", "text", "boolean"])
    op = rng.choice(A.PRED_OPS)
    left = gen_scalar(ctx, ty, depth)
    right = gen_scalar(ctx, ty, depth)
    if (
        allow_agg_scope is not None
        and ty in ("int", "double precision", "text")
        and rng.random() < 0.6
    ):
        pools = [allow_agg_scope] + [s.attrs for s in ctx.scopes if s.is_group]
        if ty == "text":
            # a text comparison partner needs a text-valued aggregate
            pools = [p for p in pools if any(t == "text" for t in p.values())]
        if pools:
            left = gen_agg(ctx, rng.choice(pools), ty, depth)
    return A.FPred(op, left, right)


@dataclass
class GenQuery:
    query: A.Query
    names: list  # output attr names in a fixed order
    types: dict  # name -> column type


def _base_table(ctx: GenCtx) -> GenQuery:
    rng = ctx.rng
    name = rng.choice(list(ctx.schema.tables))
    ts = ctx.schema[name]
    alias = ctx.fresh()
    items = tuple(
        (A.Attr(f"{name}.{c}"), f"{alias}.{c}") for c, _ in ts.columns
    )
    q = A.QProject(items, A.QTable(name))
    names = [f"{alias}.{c}" for c, _ in ts.columns]
    types = {f"{alias}.{c}": t for c, t in ts.columns}
    return GenQuery(q, names, types)


def gen_query(ctx: GenCtx, depth: int, want_single: bool = False) -> GenQuery:
    rng = ctx.rng
    base = _base_table(ctx)
    if rng.random() < 0.3 and depth > 0:
        other = _base_table(ctx)
        base = GenQuery(
            A.QJoin(base.query, other.query),
            base.names + other.names,
            {**base.types, **other.types},
        )
    src = base
    r = rng.random()
    if depth <= 0:
        r = min(r, 0.25)

    if r < 0.30:
        # plain projection, possibly narrowing
        names = src.names[:]
        rng.shuffle(names)
        n = 1 if want_single else rng.randint(1, len(names))
        picked = names[:n]
        items = tuple((A.Attr(a), _out_name(ctx, a)) for a in picked)
        return GenQuery(
            A.QProject(items, src.query),
            [n2 for _, n2 in items],
            {n2: src.types[a] for a, n2 in zip(picked, [n2 for _, n2 in items])},
        )
    if r < 0.60:
        # selection with a (possibly correlated) formula
        ctx.scopes.insert(0, Scope(dict(src.types), (), False))
        f = gen_formula(ctx, depth - 1)
        ctx.scopes.pop(0)
        inner = A.QSelect(f, src.query)
        picked = src.names if not want_single else [rng.choice(src.names)]
        items = tuple((A.Attr(a), _out_name(ctx, a)) for a in picked)
        return GenQuery(
            A.QProject(items, inner),
            [n2 for _, n2 in items],
            {n2: src.types[a] for a, n2 in zip(picked, [n2 for _, n2 in items])},
        )
    if r < 0.90:
        # group-by with having (the hard feature, weighted up)
        keys = [a for a in src.names if rng.random() < 0.6]
        if not keys:
            keys = [rng.choice(src.names)]
        gscope = Scope(dict(src.types), tuple(keys), True)
        ctx.scopes.insert(0, gscope)
        having: A.Formula = A.FTrue()
        if rng.random() < 0.7:
            having = gen_formula(ctx, depth - 1, allow_agg_scope=dict(src.types))
        items = []
        agg_ty = None
        if want_single:
            a = rng.choice(keys)
            items.append((A.Attr(a), _out_name(ctx, a)))
        else:
            for a in keys:
                if rng.random() < 0.8:
                    items.append((A.Attr(a), _out_name(ctx, a)))
            agg_ty = rng.choice(["int", "double precision", "text"])
            pools = [dict(src.types)] + [
                s.attrs for s in ctx.scopes[1:] if s.is_group
            ]
            if agg_ty == "text":
                pools = [p for p in pools if any(t == "text" for t in p.values())]
                if not pools:
                    agg_ty = "int"
                    pools = [dict(src.types)]
            items.append(
                (gen_agg(ctx, rng.choice(pools), agg_ty, depth - 1), ctx.fresh())
            )
        ctx.scopes.pop(0)
        types = {}
        for e, n2 in items:
            if isinstance(e, A.Attr):
                types[n2] = src.types[e.name]
            else:
                types[n2] = agg_result_type(e, agg_ty)
        return GenQuery(
            A.QGamma(tuple(items), tuple(A.Attr(a) for a in keys), having, src.query),
            [n2 for _, n2 in items],
            types,
        )
    # set operation: right side projected onto the left's output names,
    # matching column types so downstream comparisons stay well-typed
    left = gen_query(ctx, depth - 1, want_single)
    right = gen_query(ctx, depth - 1)
    ritems = []
    for n2 in left.names:
        ty = left.types[n2]
        same_ty = [a for a in right.names if right.types[a] == ty]
        if same_ty:
            ritems.append((A.Attr(rng.choice(same_ty)), n2))
        else:
            ritems.append((A.Const(gen_value(rng, ty)), n2))
    kind = rng.choice(["union", "intersect", "except"])
    return GenQuery(
        A.QSetOp(kind, left.query, A.QProject(tuple(ritems), right.query)),
        left.names,
        left.types,
    )


def _out_name(ctx: GenCtx, attr: str) -> str:
    # keep output names collision-free and unqualified-ish
    ctx.counter += 1
    return f"o{ctx.counter}_{attr.split('.')[-1]}"


def gen_case(seed: int):
    """One differential-test case: (schema, instance, query)."""
    rng = random.Random(seed)
    schema = gen_schema(rng)
    inst = gen_instance(rng, schema)
    ctx = GenCtx(rng, schema)
    gq = gen_query(ctx, rng.randint(1, 3))
    return schema, inst, gq.query


def gen_env_case(seed: int):
    """A case with a random non-empty environment (for the generalized
    translation property): returns (schema, instance, env, query)."""
    rng = random.Random(seed)
    schema = gen_schema(rng)
    inst = gen_instance(rng, schema)
    ctx = GenCtx(rng, schema)
    env = []
    scopes = []
    for li in range(rng.randint(1, 2)):
        cols = tuple(
            (f"e{li}{c}", rng.choice(_TYPES)) for c in _COLUMN_POOL[: rng.randint(1, 2)]
        )
        is_group = rng.random() < 0.5
        nrows = rng.randint(1, 3) if is_group else 1
        rows = tuple(
            Row((name, gen_value(rng, ty)) for name, ty in cols)
            for _ in range(nrows)
        )
        if is_group:
            # grouping keys must agree across the group's rows
            keys = tuple(A.Attr(name) for name, _ in cols[:1])
            first = rows[0]
            rows = tuple(
                Row(
                    (name, first[name] if A.Attr(name) in keys else v)
                    for name, v in r.items()
                )
                for r in rows
            )
        else:
            keys = ()
        attrs = frozenset(n for n, _ in cols)
        env.append(A.Slice(attrs, keys, rows, is_group))
        scopes.append(
            Scope(dict(cols), tuple(k.name for k in keys), is_group)
        )
    ctx.scopes = scopes
    gq = gen_query(ctx, rng.randint(1, 2))
    return schema, inst, tuple(env), gq.query


# ---------------------------------------------------------------------------
# Differential-test harness
# ---------------------------------------------------------------------------


def _property_failures(schema, inst, q) -> list:
    """All differential properties for one case; empty means pass."""
    from . import alg2nra, nrae, pipeline
    from .data_model import (
        Rec,
        bag_to_data,
        data_bag_equal,
        instance_to_data,
    )
    from .sqlalg import eval_query, wf_query

    failures = []
    wf_query(q, (), schema)
    arts = pipeline.lower_algebra(q, schema, optimize=False)
    for pair in pipeline.stage_disagreements(arts, inst):
        failures.append({"kind": "stage", "stages": list(pair)})
    # optimizer equivalence on the translated query
    db = instance_to_data(inst)
    base = nrae.eval_nrae(arts.nrae_q, Rec(()), db, db)
    opt = nrae.eval_nrae(nrae.optimize(arts.nrae_q), Rec(()), db, db)
    if not data_bag_equal(base, opt):
        failures.append({"kind": "optimizer"})
    return failures


def _env_property_failure(seed: int):
    """The generalized translation property on a random environment."""
    from . import alg2nra, nrae
    from .data_model import bag_to_data, data_bag_equal, instance_to_data, Rec
    from .sqlalg import eval_query, wf_query

    schema, inst, env, q = gen_env_case(seed)
    aenv = alg2nra.static_of(env)
    wf_query(q, aenv, schema)
    want = bag_to_data(eval_query(q, env, inst))
    db = instance_to_data(inst)
    got = nrae.eval_nrae(
        alg2nra.translate_query(aenv, q, schema), alg2nra.runtime_of(env), db, db
    )
    if not data_bag_equal(got, want):
        from .sqlalg import print_query

        return {"kind": "environment", "query": print_query(q)}
    return None


def _shrink_query_candidates(q):
    from . import sqlalg as A

    if isinstance(q, A.QProject) and len(q.items) > 1:
        for i in range(len(q.items)):
            yield A.QProject(q.items[:i] + q.items[i + 1 :], q.query)
    if isinstance(q, A.QProject):
        yield from (
            A.QProject(q.items, sub) for sub in _shrink_query_candidates(q.query)
        )
    if isinstance(q, A.QSelect):
        yield q.query
        yield A.QSelect(A.FTrue(), q.query)
        yield from (
            A.QSelect(q.formula, sub) for sub in _shrink_query_candidates(q.query)
        )
    if isinstance(q, A.QGamma):
        yield A.QGamma(q.items, q.keys, A.FTrue(), q.query)
        yield from (
            A.QGamma(q.items, q.keys, q.having, sub)
            for sub in _shrink_query_candidates(q.query)
        )
    if isinstance(q, A.QSetOp):
        yield q.left
        yield q.right
    if isinstance(q, A.QJoin):
        yield q.left
        yield q.right


def _shrink_instance_candidates(inst):
    from .data_model import Bag, Instance

    for name, bag in inst.tables.items():
        for i in range(len(bag.rows)):
            rows = bag.rows[:i] + bag.rows[i + 1 :]
            tables = dict(inst.tables)
            tables[name] = Bag(rows, bag.sort)
            yield Instance(inst.schema, tables)


def shrink_case(schema, inst, q, still_fails, budget: int = 150):
    """Greedy shrinking: drop rows and simplify the query while the
    failure persists; bounded by a re-check budget so pathological
    failures still terminate quickly."""
    from .sqlalg import WellFormednessError, wf_query

    spent = 0
    changed = True
    while changed and spent < budget:
        changed = False
        for cand in _shrink_query_candidates(q):
            try:
                wf_query(cand, (), schema)
            except WellFormednessError:
                continue
            spent += 1
            if still_fails(schema, inst, cand):
                q = cand
                changed = True
                break
            if spent >= budget:
                return inst, q
        if changed:
            continue
        for cand_inst in _shrink_instance_candidates(inst):
            spent += 1
            if still_fails(schema, cand_inst, q):
                inst = cand_inst
                changed = True
                break
            if spent >= budget:
                return inst, q
    return inst, q


def run_one_case(seed: int):
    """Returns None on success, a failure record otherwise."""
    from .sqlalg import print_query

    schema, inst, q = gen_case(seed)
    failures = _property_failures(schema, inst, q)
    if failures:
        def still_fails(s, i, qq):
            try:
                return bool(_property_failures(s, i, qq))
            except Exception:
                return False

        inst, q = shrink_case(schema, inst, q, still_fails)
        return {
            "seed": seed,
            "failures": _property_failures(schema, inst, q) or failures,
            "query": print_query(q),
            "tables": {
                name: [dict(r.items()) for r in bag]
                for name, bag in inst.tables.items()
            },
        }
    env_failure = _env_property_failure(seed)
    if env_failure:
        return {"seed": seed, "failures": [env_failure], "query": env_failure.get("query")}
    return None


def run_difftest(seed: int = 42, cases: int = 1000, jobs: int = 1) -> dict:
    """Generate cases with per-case sub-seeds (parallelism never changes
    the outcome) and collect a machine-readable report."""
    sub_seeds = [seed * 1_000_003 + i for i in range(cases)]
    failures = []
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for res in pool.map(run_one_case, sub_seeds):
                if res is not None:
                    failures.append(res)
    else:
        for s in sub_seeds:
            res = run_one_case(s)
            if res is not None:
                failures.append(res)
    failures.sort(key=lambda f: f["seed"])
    return {"seed": seed, "cases": cases, "failures": failures}
