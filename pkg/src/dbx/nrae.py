"""The nested relational algebra: combinators evaluated against an
(environment, input) pair, plus group-by desugaring and a small
rewrite-based optimizer.

Evaluation carries a third, never-rebound binding: the translated
database instance, reachable through the Db leaf.  Table access
compiles to a field access on it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data_model import Atom, Coll, NraData, Rec
from .data_model import Left as DLeft, Right as DRight
from . import ops
from .ops import Op, OpError


class NraQuery:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(NraQuery):
    value: NraData


@dataclass(frozen=True, slots=True)
class In(NraQuery):
    pass


@dataclass(frozen=True, slots=True)
class EnvQ(NraQuery):
    pass


@dataclass(frozen=True, slots=True)
class Db(NraQuery):
    """The distinguished constant holding the instance record."""


@dataclass(frozen=True, slots=True)
class Unary(NraQuery):
    op: Op
    arg: NraQuery


@dataclass(frozen=True, slots=True)
class Binary(NraQuery):
    op: Op
    left: NraQuery
    right: NraQuery


@dataclass(frozen=True, slots=True)
class Comp(NraQuery):
    """f @ g: evaluate g, feed its result to f as the new input."""

    f: NraQuery
    g: NraQuery


@dataclass(frozen=True, slots=True)
class CompEnv(NraQuery):
    """f @e g: evaluate g, install its result as the environment for f;
    the input is unchanged."""

    f: NraQuery
    g: NraQuery


@dataclass(frozen=True, slots=True)
class Map(NraQuery):
    body: NraQuery
    src: NraQuery


@dataclass(frozen=True, slots=True)
class Select(NraQuery):
    pred: NraQuery
    src: NraQuery


@dataclass(frozen=True, slots=True)
class Product(NraQuery):
    left: NraQuery
    right: NraQuery


@dataclass(frozen=True, slots=True)
class Default(NraQuery):
    """q1 ?? q2: q1's result unless it is the empty bag."""

    left: NraQuery
    right: NraQuery


@dataclass(frozen=True, slots=True)
class Either(NraQuery):
    on_left: NraQuery
    on_right: NraQuery


@dataclass(frozen=True, slots=True)
class MapEnv(NraQuery):
    body: NraQuery


class NraeError(Exception):
    """Dynamic evaluation error, carrying the failing sub-term."""

    def __init__(self, msg: str, term: NraQuery):
        super().__init__(msg)
        self.term = term


def eval_nrae(q: NraQuery, env: NraData, d: NraData, db: NraData) -> NraData:
    if isinstance(q, Const):
        return q.value
    if isinstance(q, In):
        return d
    if isinstance(q, EnvQ):
        return env
    if isinstance(q, Db):
        return db
    if isinstance(q, Unary):
        try:
            return ops.apply_unary_data(q.op, eval_nrae(q.arg, env, d, db))
        except OpError as exc:
            raise NraeError(str(exc), q) from exc
    if isinstance(q, Binary):
        v1 = eval_nrae(q.left, env, d, db)
        v2 = eval_nrae(q.right, env, d, db)
        try:
            return ops.apply_binary_data(q.op, v1, v2)
        except OpError as exc:
            raise NraeError(str(exc), q) from exc
    if isinstance(q, Comp):
        return eval_nrae(q.f, env, eval_nrae(q.g, env, d, db), db)
    if isinstance(q, CompEnv):
        return eval_nrae(q.f, eval_nrae(q.g, env, d, db), d, db)
    if isinstance(q, Map):
        src = eval_nrae(q.src, env, d, db)
        if not isinstance(src, Coll):
            raise NraeError(f"map over a non-bag: {src!r}", q)
        return Coll(eval_nrae(q.body, env, x, db) for x in src.items)
    if isinstance(q, Select):
        src = eval_nrae(q.src, env, d, db)
        if not isinstance(src, Coll):
            raise NraeError(f"select over a non-bag: {src!r}", q)
        out = []
        for x in src.items:
            keep = eval_nrae(q.pred, env, x, db)
            if not (isinstance(keep, Atom) and isinstance(keep.value, bool)):
                raise NraeError(f"selection condition was {keep!r}", q)
            if keep.value:
                out.append(x)
        return Coll(out)
    if isinstance(q, Product):
        left = eval_nrae(q.left, env, d, db)
        right = eval_nrae(q.right, env, d, db)
        if not isinstance(left, Coll) or not isinstance(right, Coll):
            raise NraeError("product of non-bags", q)
        out = []
        for x in left.items:
            for y in right.items:
                if not isinstance(x, Rec) or not isinstance(y, Rec):
                    raise NraeError("product elements must be records", q)
                out.append(ops.apply_binary_data(ops.CONCAT, x, y))
        return Coll(out)
    if isinstance(q, Default):
        left = eval_nrae(q.left, env, d, db)
        if left == Coll(()):
            return eval_nrae(q.right, env, d, db)
        return left
    if isinstance(q, Either):
        if isinstance(d, DLeft):
            return eval_nrae(q.on_left, env, d.data, db)
        if isinstance(d, DRight):
            return eval_nrae(q.on_right, env, d.data, db)
        raise NraeError(f"either over a non-tagged value: {d!r}", q)
    if isinstance(q, MapEnv):
        if not isinstance(env, Coll):
            raise NraeError(f"map-env over a non-bag environment: {env!r}", q)
        return Coll(eval_nrae(q.body, x, d, db) for x in env.items)
    raise NraeError(f"not a query: {q!r}", q)


# ---------------------------------------------------------------------------
# group-by desugaring
# ---------------------------------------------------------------------------


def desugar_group_by(g: str, attrs: tuple[str, ...], q: NraQuery) -> NraQuery:
    """Grouping from simpler constructs: stash the input under `input`,
    map over its distinct keys, and attach each key's matching rows
    under the fresh label g."""
    if g in attrs:
        raise ValueError(f"group label {g!r} must be fresh w.r.t. {attrs}")
    keys = Unary(
        ops.DISTINCT,
        Map(Unary(ops.PROJECT(attrs), In()), Unary(ops.DOT("input"), EnvQ())),
    )
    matching = CompEnv(
        Select(
            Binary(ops.EQ, Unary(ops.DOT("key"), EnvQ()), Unary(ops.PROJECT(attrs), In())),
            Unary(ops.DOT("input"), EnvQ()),
        ),
        Binary(ops.CONCAT, Unary(ops.REC("key"), In()), EnvQ()),
    )
    body = Binary(ops.CONCAT, In(), Unary(ops.REC(g), matching))
    return CompEnv(Map(body, keys), Unary(ops.REC("input"), q))


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def _rw_either_tag(q: NraQuery):
    if isinstance(q, Comp) and isinstance(q.f, Either):
        g = q.g
        if isinstance(g, Unary) and g.op == ops.LEFT:
            return Comp(q.f.on_left, g.arg)
        if isinstance(g, Unary) and g.op == ops.RIGHT:
            return Comp(q.f.on_right, g.arg)
        if isinstance(g, Const) and isinstance(g.value, DLeft):
            return Comp(q.f.on_left, Const(g.value.data))
        if isinstance(g, Const) and isinstance(g.value, DRight):
            return Comp(q.f.on_right, Const(g.value.data))
    return None


def _rw_comp_id(q: NraQuery):
    if isinstance(q, Comp):
        if isinstance(q.g, In):
            return q.f
        if isinstance(q.f, In):
            return q.g
    return None


def _rw_map_id(q: NraQuery):
    if isinstance(q, Map) and isinstance(q.body, In):
        return q.src
    return None


def _rw_select_true(q: NraQuery):
    if isinstance(q, Select) and q.pred == Const(Atom(True)):
        return q.src
    return None


def _rw_flatten_singleton(q: NraQuery):
    if isinstance(q, Unary) and q.op == ops.FLATTEN:
        arg = q.arg
        if isinstance(arg, Unary) and arg.op == ops.COLL:
            return arg.arg
    return None


REWRITE_RULES = (
    _rw_either_tag,
    _rw_comp_id,
    _rw_map_id,
    _rw_select_true,
    _rw_flatten_singleton,
)

MAX_PASSES = 100


def _children(q: NraQuery) -> tuple:
    if isinstance(q, (Const, In, EnvQ, Db)):
        return ()
    if isinstance(q, Unary):
        return (q.arg,)
    if isinstance(q, MapEnv):
        return (q.body,)
    if isinstance(q, Binary):
        return (q.left, q.right)
    if isinstance(q, Comp):
        return (q.f, q.g)
    if isinstance(q, CompEnv):
        return (q.f, q.g)
    if isinstance(q, Map):
        return (q.body, q.src)
    if isinstance(q, Select):
        return (q.pred, q.src)
    if isinstance(q, (Product, Default)):
        return (q.left, q.right)
    if isinstance(q, Either):
        return (q.on_left, q.on_right)
    raise TypeError(q)


def _rebuild(q: NraQuery, kids: tuple) -> NraQuery:
    if isinstance(q, Unary):
        return Unary(q.op, kids[0])
    if isinstance(q, MapEnv):
        return MapEnv(kids[0])
    if isinstance(q, Binary):
        return Binary(q.op, kids[0], kids[1])
    if isinstance(q, Comp):
        return Comp(kids[0], kids[1])
    if isinstance(q, CompEnv):
        return CompEnv(kids[0], kids[1])
    if isinstance(q, Map):
        return Map(kids[0], kids[1])
    if isinstance(q, Select):
        return Select(kids[0], kids[1])
    if isinstance(q, Product):
        return Product(kids[0], kids[1])
    if isinstance(q, Default):
        return Default(kids[0], kids[1])
    if isinstance(q, Either):
        return Either(kids[0], kids[1])
    return q


def _rewrite_once(q: NraQuery) -> NraQuery:
    kids = _children(q)
    if kids:
        q = _rebuild(q, tuple(_rewrite_once(k) for k in kids))
    for rule in REWRITE_RULES:
        out = rule(q)
        if out is not None:
            return out
    return q


def optimize(q: NraQuery) -> NraQuery:
    """Bounded fixpoint of the rewrite set."""
    for _ in range(MAX_PASSES):
        nxt = _rewrite_once(q)
        if nxt == q:
            return q
        q = nxt
    return q


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------


def print_data(d: NraData) -> str:
    from .data_model import _Unit

    if isinstance(d, Atom):
        v = d.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return "'" + v.replace("'", "''") + "'"
        if isinstance(v, float):
            return repr(v)
        return str(v)
    if isinstance(d, _Unit):
        return "unit"
    if isinstance(d, DLeft):
        return f"left({print_data(d.data)})"
    if isinstance(d, DRight):
        return f"right({print_data(d.data)})"
    if isinstance(d, Rec):
        return "{" + ", ".join(f"{k}: {print_data(v)}" for k, v in d.fields) + "}"
    if isinstance(d, Coll):
        return "[" + ", ".join(print_data(x) for x in d.items) + "]"
    raise TypeError(d)


def print_nrae(q: NraQuery) -> str:
    if isinstance(q, Const):
        return print_data(q.value)
    if isinstance(q, In):
        return "In"
    if isinstance(q, EnvQ):
        return "Env"
    if isinstance(q, Db):
        return "Db"
    if isinstance(q, Unary):
        if q.op.name == "dot":
            return f"{print_nrae(q.arg)}.{q.op.params[0]}"
        if q.op.name == "rec":
            return "{" + f"{q.op.params[0]}: {print_nrae(q.arg)}" + "}"
        return f"{q.op}({print_nrae(q.arg)})"
    if isinstance(q, Binary):
        return f"{q.op}({print_nrae(q.left)}, {print_nrae(q.right)})"
    if isinstance(q, Comp):
        return f"({print_nrae(q.f)} @ {print_nrae(q.g)})"
    if isinstance(q, CompEnv):
        return f"({print_nrae(q.f)} @e {print_nrae(q.g)})"
    if isinstance(q, Map):
        return f"chi<{print_nrae(q.body)}>({print_nrae(q.src)})"
    if isinstance(q, Select):
        return f"sigma<{print_nrae(q.pred)}>({print_nrae(q.src)})"
    if isinstance(q, Product):
        return f"({print_nrae(q.left)} x {print_nrae(q.right)})"
    if isinstance(q, Default):
        return f"({print_nrae(q.left)} ?? {print_nrae(q.right)})"
    if isinstance(q, Either):
        return f"either<{print_nrae(q.on_left)}><{print_nrae(q.on_right)}>"
    if isinstance(q, MapEnv):
        return f"chi_env<{print_nrae(q.body)}>"
    raise TypeError(q)
