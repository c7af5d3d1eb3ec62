"""The relational-algebra reference interpreter.

This stage is the semantic ground truth for the whole pipeline: an
environment-stack interpreter for queries, formulas and expressions,
with Kleene three-valued logic for null handling and SQL aggregates.

The evaluation environment is a stack of slices (A, G, T): the
attributes introduced at that level, the grouping expressions when the
level came from a grouping operator, and the current tuple (or the
group's tuples).  Attribute lookup walks the stack top-down; aggregates
locate their target slice with ``find_eval_env``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .data_model import (
    Bag,
    Instance,
    InternalError,
    Row,
    SqlValue,
    value_group_key,
    value_order_key,
)

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

FN_OPS = ("+", "-", "*", "/", "u-", "||")
PRED_OPS = ("=", "<>", "<", "<=", ">", ">=")
AGG_FNS = ("sum", "avg", "min", "max", "count", "count_star")


class Expr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: SqlValue


@dataclass(frozen=True, slots=True)
class Attr(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Fn(Expr):
    op: str
    args: tuple[Expr, ...]


@dataclass(frozen=True, slots=True)
class Agg(Expr):
    fn: str
    arg: Expr


class Formula:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class FTrue(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FAnd(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class FOr(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class FNot(Formula):
    arg: Formula


@dataclass(frozen=True, slots=True)
class FPred(Formula):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, slots=True)
class FQuant(Formula):
    """p(e, all Q) or p(e, any Q); the subquery must have a single
    output attribute."""

    op: str
    kind: str  # "all" | "any"
    expr: Expr
    query: "Query"


@dataclass(frozen=True, slots=True)
class FIn(Formula):
    """(e1 as a1, ...) in Q; names match Q's sort."""

    items: tuple[tuple[Expr, str], ...]
    query: "Query"


@dataclass(frozen=True, slots=True)
class FExists(Formula):
    query: "Query"


class Query:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class QEmpty(Query):
    pass


@dataclass(frozen=True, slots=True)
class QTable(Query):
    name: str


@dataclass(frozen=True, slots=True)
class QSetOp(Query):
    kind: str  # "union" | "intersect" | "except"
    left: Query
    right: Query


@dataclass(frozen=True, slots=True)
class QJoin(Query):
    left: Query
    right: Query


@dataclass(frozen=True, slots=True)
class QProject(Query):
    items: tuple[tuple[Expr, str], ...]
    query: Query


@dataclass(frozen=True, slots=True)
class QSelect(Query):
    formula: Formula
    query: Query


@dataclass(frozen=True, slots=True)
class QGamma(Query):
    items: tuple[tuple[Expr, str], ...]
    keys: tuple[Expr, ...]
    having: Formula
    query: Query


# ---------------------------------------------------------------------------
# Three-valued logic
# ---------------------------------------------------------------------------


class Bool3(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"


T3, F3, U3 = Bool3.TRUE, Bool3.FALSE, Bool3.UNKNOWN


def b3(b: bool) -> Bool3:
    return T3 if b else F3


def and3(a: Bool3, b: Bool3) -> Bool3:
    if a is F3 or b is F3:
        return F3
    if a is T3 and b is T3:
        return T3
    return U3


def or3(a: Bool3, b: Bool3) -> Bool3:
    if a is T3 or b is T3:
        return T3
    if a is F3 and b is F3:
        return F3
    return U3


def not3(a: Bool3) -> Bool3:
    if a is T3:
        return F3
    if a is F3:
        return T3
    return U3


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Slice:
    attrs: frozenset[str]
    groups: tuple[Expr, ...]
    rows: tuple[Row, ...]
    is_group: bool  # True when introduced by a grouping operator


Env = tuple[Slice, ...]


def one_slice(row: Row) -> Slice:
    return Slice(frozenset(row.attrs), (), (row,), False)


def group_slice(attrs: frozenset[str], keys: tuple[Expr, ...], rows) -> Slice:
    return Slice(attrs, keys, tuple(rows), True)


# ---------------------------------------------------------------------------
# Scalar functions
# ---------------------------------------------------------------------------


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def int_div(a: int, b: int) -> int:
    """Integer division truncating toward zero (matching JS BigInt)."""
    q = a // b
    if a % b != 0 and (a < 0) != (b < 0):
        q += 1
    return q


def apply_fn(op: str, args: list[SqlValue]) -> SqlValue:
    """Null-absorbing scalar functions; division by zero yields null."""
    if any(a is None for a in args):
        return None
    if op == "u-":
        (a,) = args
        if not _is_num(a):
            raise InternalError(f"u- on {a!r}")
        return -a
    if op == "||":
        a, b = args
        if not isinstance(a, str) or not isinstance(b, str):
            raise InternalError(f"|| on {a!r}, {b!r}")
        return a + b
    a, b = args
    if not _is_num(a) or not _is_num(b):
        raise InternalError(f"{op} on {a!r}, {b!r}")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            return None
        if isinstance(a, int) and isinstance(b, int):
            return int_div(a, b)
        return float(a) / float(b)
    raise InternalError(f"unknown function {op}")


def compare_values(op: str, a: SqlValue, b: SqlValue) -> Bool3:
    """Predicate comparison: unknown when either side is null, numeric
    across integer/double, lexicographic on text."""
    if a is None or b is None:
        return U3
    if isinstance(a, bool) and isinstance(b, bool):
        ka, kb = a, b
    elif _is_num(a) and _is_num(b):
        ka, kb = a, b
    elif isinstance(a, str) and isinstance(b, str):
        ka, kb = a, b
    else:
        raise InternalError(f"incomparable values {a!r} {op} {b!r}")
    if op == "=":
        return b3(ka == kb)
    if op == "<>":
        return b3(ka != kb)
    if op == "<":
        return b3(ka < kb)
    if op == "<=":
        return b3(ka <= kb)
    if op == ">":
        return b3(ka > kb)
    if op == ">=":
        return b3(ka >= kb)
    raise InternalError(f"unknown predicate {op}")


def _value_family(v: SqlValue) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "num"
    return "text"


def apply_aggregate(fn: str, values: list[SqlValue]) -> SqlValue:
    """Fold an aggregate over the values in bag order.  sum/avg/min/max
    skip nulls and yield null when nothing remains; count counts
    non-null values; count_star counts every row."""
    if fn == "count_star":
        return len(values)
    kept = [v for v in values if v is not None]
    if fn == "count":
        return len(kept)
    if not kept:
        return None
    if fn in ("sum", "avg"):
        if not all(_is_num(v) for v in kept):
            raise InternalError(f"{fn} over non-numeric values")
        total = kept[0]
        for v in kept[1:]:
            total = total + v
        if fn == "sum":
            return total
        return float(total) / float(len(kept))
    if fn in ("min", "max"):
        if len({_value_family(v) for v in kept}) > 1:
            raise InternalError(f"{fn} over mixed value families")
        best = kept[0]
        for v in kept[1:]:
            if fn == "min":
                if value_order_key(v) < value_order_key(best):
                    best = v
            elif value_order_key(v) > value_order_key(best):
                best = v
        return best
    raise InternalError(f"unknown aggregate {fn}")


# ---------------------------------------------------------------------------
# find_eval_env
# ---------------------------------------------------------------------------


def is_built_upon(base: set, e: Expr) -> bool:
    if isinstance(e, Const):
        return True
    if e in base:
        return True
    if isinstance(e, Fn):
        return all(is_built_upon(base, a) for a in e.args)
    return False


def _support(env_or_aenv, top_attrs) -> set:
    base = {Attr(a) for a in top_attrs}
    for s in env_or_aenv:
        base.update(s.groups)
    return base


def find_eval_env(env: Env, e: Expr) -> Optional[Env]:
    """Deepest environment suffix whose top slice supports e: constants
    evaluate anywhere, otherwise the deepest slice over whose attributes
    (plus deeper grouping expressions) e is built."""
    if isinstance(e, Const):
        return env
    if not env:
        return None
    deeper = find_eval_env(env[1:], e)
    if deeper is not None:
        return deeper
    if is_built_upon(_support(env[1:], env[0].attrs), e):
        return env
    return None


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------


def eval_expr(e: Expr, env: Env) -> SqlValue:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Attr):
        for i, s in enumerate(env):
            if e.name in s.attrs:
                if not s.rows:
                    raise InternalError(f"attribute {e.name} read from empty slice")
                return s.rows[0][e.name]
        raise InternalError(f"unresolved attribute {e.name}")
    if isinstance(e, Fn):
        return apply_fn(e.op, [eval_expr(a, env) for a in e.args])
    if isinstance(e, Agg):
        suffix = find_eval_env(env, e.arg)
        if suffix is None:
            raise InternalError(f"aggregate argument {e.arg} resolves nowhere")
        top = suffix[0]
        rest = suffix[1:]
        values = [
            eval_expr(e.arg, (Slice(top.attrs, top.groups, (t,), False),) + rest)
            for t in top.rows
        ]
        return apply_aggregate(e.fn, values)
    raise InternalError(f"not an expression: {e!r}")


def eval_formula(f: Formula, env: Env, inst: Instance) -> Bool3:
    if isinstance(f, FTrue):
        return T3
    if isinstance(f, FAnd):
        return and3(eval_formula(f.left, env, inst), eval_formula(f.right, env, inst))
    if isinstance(f, FOr):
        return or3(eval_formula(f.left, env, inst), eval_formula(f.right, env, inst))
    if isinstance(f, FNot):
        return not3(eval_formula(f.arg, env, inst))
    if isinstance(f, FPred):
        return compare_values(f.op, eval_expr(f.left, env), eval_expr(f.right, env))
    if isinstance(f, FQuant):
        v = eval_expr(f.expr, env)
        bag = eval_query(f.query, env, inst)
        attr = next(iter(bag.sort)) if bag.sort else None
        results = [compare_values(f.op, v, t[attr]) for t in bag]
        if f.kind == "all":
            out = T3
            for r in results:
                out = and3(out, r)
            return out
        out = F3
        for r in results:
            out = or3(out, r)
        return out
    if isinstance(f, FIn):
        values = [(name, eval_expr(e, env)) for e, name in f.items]
        bag = eval_query(f.query, env, inst)
        out = F3
        for t in bag:
            match = T3
            for name, v in values:
                match = and3(match, compare_values("=", v, t[name]))
            out = or3(out, match)
        return out
    if isinstance(f, FExists):
        return b3(len(eval_query(f.query, env, inst)) > 0)
    raise InternalError(f"not a formula: {f!r}")


def _set_op(kind: str, b1: Bag, b2: Bag) -> Bag:
    """Multiset set operations; tuples compare with null equal to null."""
    if b1.sort != b2.sort:
        raise InternalError("set operation on differing sorts")
    if kind == "union":
        return Bag(b1.rows + b2.rows, b1.sort)
    counts: dict = {}
    for r in b2:
        counts[r.key()] = counts.get(r.key(), 0) + 1
    out = []
    if kind == "intersect":
        for r in b1:
            k = r.key()
            if counts.get(k, 0) > 0:
                counts[k] -= 1
                out.append(r)
    elif kind == "except":
        for r in b1:
            k = r.key()
            if counts.get(k, 0) > 0:
                counts[k] -= 1
            else:
                out.append(r)
    else:
        raise InternalError(f"unknown set operation {kind}")
    return Bag(out, b1.sort)


def _natural_join(b1: Bag, b2: Bag) -> Bag:
    common = b1.sort & b2.sort
    sort = b1.sort | b2.sort
    out = []
    for t1 in b1:
        for t2 in b2:
            if all(
                value_group_key(t1[a]) == value_group_key(t2[a]) for a in common
            ):
                merged = dict(t1.items())
                merged.update(t2.items())
                out.append(Row(merged.items()))
    return Bag(out, sort)


def eval_query(q: Query, env: Env, inst: Instance) -> Bag:
    if isinstance(q, QEmpty):
        return Bag((), frozenset())
    if isinstance(q, QTable):
        return inst.table(q.name)
    if isinstance(q, QSetOp):
        return _set_op(q.kind, eval_query(q.left, env, inst), eval_query(q.right, env, inst))
    if isinstance(q, QJoin):
        return _natural_join(eval_query(q.left, env, inst), eval_query(q.right, env, inst))
    if isinstance(q, QProject):
        src = eval_query(q.query, env, inst)
        sort = frozenset(name for _, name in q.items)
        rows = []
        for t in src:
            inner = (one_slice(t),) + env
            rows.append(Row((name, eval_expr(e, inner)) for e, name in q.items))
        return Bag(rows, sort)
    if isinstance(q, QSelect):
        src = eval_query(q.query, env, inst)
        keep = [
            t
            for t in src
            if eval_formula(q.formula, (one_slice(t),) + env, inst) is T3
        ]
        return Bag(keep, src.sort)
    if isinstance(q, QGamma):
        src = eval_query(q.query, env, inst)
        groups: dict[tuple, list[Row]] = {}
        for t in src:
            inner = (one_slice(t),) + env
            key = tuple(value_group_key(eval_expr(k, inner)) for k in q.keys)
            groups.setdefault(key, []).append(t)
        sort = frozenset(name for _, name in q.items)
        rows = []
        for members in groups.values():
            gslice = (group_slice(src.sort, q.keys, members),) + env
            if eval_formula(q.having, gslice, inst) is not T3:
                continue
            rows.append(Row((name, eval_expr(e, gslice)) for e, name in q.items))
        return Bag(rows, sort)
    raise InternalError(f"not a query: {q!r}")


# ---------------------------------------------------------------------------
# Static well-formedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class StaticSlice:
    attrs: frozenset[str]
    groups: tuple[Expr, ...]
    is_group: bool


AEnv = tuple[StaticSlice, ...]


class WellFormednessError(InternalError):
    """A query failed the static slice-stack discipline; on frontend
    output this signals a compiler bug."""


def static_of_env(env: Env) -> AEnv:
    return tuple(StaticSlice(s.attrs, s.groups, s.is_group) for s in env)


def find_eval_env_static(aenv: AEnv, e: Expr) -> Optional[AEnv]:
    """Mirror of find_eval_env over static slices (it never consults the
    tuples)."""
    if isinstance(e, Const):
        return aenv
    if not aenv:
        return None
    deeper = find_eval_env_static(aenv[1:], e)
    if deeper is not None:
        return deeper
    if is_built_upon(_support(aenv[1:], aenv[0].attrs), e):
        return aenv
    return None


def _wf_expr(e: Expr, aenv: AEnv, in_agg: bool):
    if isinstance(e, Const):
        return
    if isinstance(e, Attr):
        for s in aenv:
            if e.name in s.attrs:
                if s.is_group and e not in s.groups:
                    raise WellFormednessError(
                        f"attribute {e.name} is not a grouping key of its slice"
                    )
                return
        raise WellFormednessError(f"unresolvable attribute {e.name}")
    if isinstance(e, Fn):
        for a in e.args:
            _wf_expr(a, aenv, in_agg)
        return
    if isinstance(e, Agg):
        if in_agg:
            raise WellFormednessError("aggregates must be stratified")
        suffix = find_eval_env_static(aenv, e.arg)
        if suffix is None:
            raise WellFormednessError(f"aggregate argument {e.arg} resolves nowhere")
        top = suffix[0]
        oneized = (StaticSlice(top.attrs, top.groups, False),) + suffix[1:]
        _wf_expr(e.arg, oneized, True)
        return
    raise InternalError(f"not an expression: {e!r}")


def _wf_formula(f: Formula, aenv: AEnv, schema):
    if isinstance(f, FTrue):
        return
    if isinstance(f, (FAnd, FOr)):
        _wf_formula(f.left, aenv, schema)
        _wf_formula(f.right, aenv, schema)
        return
    if isinstance(f, FNot):
        _wf_formula(f.arg, aenv, schema)
        return
    if isinstance(f, FPred):
        _wf_expr(f.left, aenv, False)
        _wf_expr(f.right, aenv, False)
        return
    if isinstance(f, FQuant):
        _wf_expr(f.expr, aenv, False)
        sort = wf_query(f.query, aenv, schema)
        if len(sort) != 1:
            raise WellFormednessError("all/any subquery must have one attribute")
        return
    if isinstance(f, FIn):
        for e, _ in f.items:
            _wf_expr(e, aenv, False)
        sort = wf_query(f.query, aenv, schema)
        names = [name for _, name in f.items]
        if len(set(names)) != len(names) or frozenset(names) != sort:
            raise WellFormednessError("in-formula names must match the subquery sort")
        return
    if isinstance(f, FExists):
        wf_query(f.query, aenv, schema)
        return
    raise InternalError(f"not a formula: {f!r}")


def wf_query(q: Query, aenv: AEnv, schema) -> frozenset[str]:
    """Check the static slice-stack discipline and return the sort."""
    if isinstance(q, QEmpty):
        return frozenset()
    if isinstance(q, QTable):
        if q.name not in schema:
            raise WellFormednessError(f"unknown table {q.name}")
        return frozenset(schema[q.name].qualified())
    if isinstance(q, QSetOp):
        s1 = wf_query(q.left, aenv, schema)
        s2 = wf_query(q.right, aenv, schema)
        if s1 != s2:
            raise WellFormednessError(f"set operation sorts differ: {s1} vs {s2}")
        return s1
    if isinstance(q, QJoin):
        s1 = wf_query(q.left, aenv, schema)
        s2 = wf_query(q.right, aenv, schema)
        if s1 & s2:
            raise WellFormednessError(f"join sides share attributes {s1 & s2}")
        return s1 | s2
    if isinstance(q, QProject):
        s = wf_query(q.query, aenv, schema)
        names = [name for _, name in q.items]
        if len(set(names)) != len(names):
            raise WellFormednessError(f"duplicate output names {names}")
        inner = (StaticSlice(s, (), False),) + aenv
        for e, _ in q.items:
            _wf_expr(e, inner, False)
        return frozenset(names)
    if isinstance(q, QSelect):
        s = wf_query(q.query, aenv, schema)
        _wf_formula(q.formula, (StaticSlice(s, (), False),) + aenv, schema)
        return s
    if isinstance(q, QGamma):
        s = wf_query(q.query, aenv, schema)
        per_tuple = (StaticSlice(s, (), False),) + aenv
        for k in q.keys:
            # keys must name attributes of the grouped input: grouping
            # partitions by fields of its own records
            if not isinstance(k, Attr) or k.name not in s:
                raise WellFormednessError(
                    f"grouping key {k} is not an attribute of the grouped query"
                )
            _wf_expr(k, per_tuple, False)
        names = [name for _, name in q.items]
        if len(set(names)) != len(names):
            raise WellFormednessError(f"duplicate output names {names}")
        genv = (StaticSlice(s, q.keys, True),) + aenv
        _wf_formula(q.having, genv, schema)
        for e, _ in q.items:
            _wf_expr(e, genv, False)
        return frozenset(names)
    raise InternalError(f"not a query: {q!r}")


# ---------------------------------------------------------------------------
# Pretty-printer (pi/sigma/gamma/join ASCII notation) and its parser
# ---------------------------------------------------------------------------


def print_expr(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return "'" + v.replace("'", "''") + "'"
        if isinstance(v, float):
            return repr(v)
        return str(v)
    if isinstance(e, Attr):
        return e.name
    if isinstance(e, Fn):
        if e.op == "u-":
            return f"(- {print_expr(e.args[0])})"
        return f"({print_expr(e.args[0])} {e.op} {print_expr(e.args[1])})"
    if isinstance(e, Agg):
        if e.fn == "count_star":
            return "count(*)"
        return f"{e.fn}({print_expr(e.arg)})"
    raise InternalError(f"not an expression: {e!r}")


def print_formula(f: Formula) -> str:
    if isinstance(f, FTrue):
        return "true"
    if isinstance(f, FAnd):
        return f"({print_formula(f.left)} and {print_formula(f.right)})"
    if isinstance(f, FOr):
        return f"({print_formula(f.left)} or {print_formula(f.right)})"
    if isinstance(f, FNot):
        return f"(not {print_formula(f.arg)})"
    if isinstance(f, FPred):
        return f"({print_expr(f.left)} {f.op} {print_expr(f.right)})"
    if isinstance(f, FQuant):
        return f"{f.kind}({f.op}, {print_expr(f.expr)}, {print_query(f.query)})"
    if isinstance(f, FIn):
        inner = ", ".join(f"{print_expr(e)} as {n}" for e, n in f.items)
        return f"in[{inner}]({print_query(f.query)})"
    if isinstance(f, FExists):
        return f"exists({print_query(f.query)})"
    raise InternalError(f"not a formula: {f!r}")


def _print_items(items) -> str:
    return ", ".join(f"{print_expr(e)} as {n}" for e, n in items)


def print_query(q: Query) -> str:
    if isinstance(q, QEmpty):
        return "()"
    if isinstance(q, QTable):
        return f"table({q.name})"
    if isinstance(q, QSetOp):
        return f"{q.kind}({print_query(q.left)}, {print_query(q.right)})"
    if isinstance(q, QJoin):
        return f"join({print_query(q.left)}, {print_query(q.right)})"
    if isinstance(q, QProject):
        return f"pi[{_print_items(q.items)}]({print_query(q.query)})"
    if isinstance(q, QSelect):
        return f"sigma[{print_formula(q.formula)}]({print_query(q.query)})"
    if isinstance(q, QGamma):
        keys = ", ".join(print_expr(k) for k in q.keys)
        return (
            f"gamma[{_print_items(q.items)}; {keys}; {print_formula(q.having)}]"
            f"({print_query(q.query)})"
        )
    raise InternalError(f"not a query: {q!r}")


class AlgParseError(InternalError):
    pass


class _AlgParser:
    """Parser for the fully parenthesized algebra notation emitted by
    print_query, used for the print/reparse round-trip check."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def _ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, k: int = 1) -> str:
        self._ws()
        return self.text[self.pos : self.pos + k]

    def eat(self, tok: str):
        self._ws()
        if not self.text.startswith(tok, self.pos):
            raise AlgParseError(f"expected {tok!r} at {self.pos}: ...{self.text[self.pos:self.pos+25]!r}")
        self.pos += len(tok)

    def try_eat(self, tok: str) -> bool:
        self._ws()
        if self.text.startswith(tok, self.pos):
            self.pos += len(tok)
            return True
        return False

    def ident(self) -> str:
        self._ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_.$"
        ):
            self.pos += 1
        if start == self.pos:
            raise AlgParseError(f"expected identifier at {self.pos}")
        return self.text[start : self.pos]

    def query(self) -> Query:
        self._ws()
        if self.try_eat("()"):
            return QEmpty()
        head = self.ident()
        if head == "table":
            self.eat("(")
            name = self.ident()
            self.eat(")")
            return QTable(name)
        if head in ("union", "intersect", "except", "join"):
            self.eat("(")
            q1 = self.query()
            self.eat(",")
            q2 = self.query()
            self.eat(")")
            if head == "join":
                return QJoin(q1, q2)
            return QSetOp(head, q1, q2)
        if head == "pi":
            self.eat("[")
            items = self.item_list("]")
            self.eat("]")
            self.eat("(")
            q = self.query()
            self.eat(")")
            return QProject(items, q)
        if head == "sigma":
            self.eat("[")
            f = self.formula()
            self.eat("]")
            self.eat("(")
            q = self.query()
            self.eat(")")
            return QSelect(f, q)
        if head == "gamma":
            self.eat("[")
            items = self.item_list(";")
            self.eat(";")
            keys = []
            if self.peek() != ";":
                keys.append(self.expr())
                while self.try_eat(","):
                    keys.append(self.expr())
            self.eat(";")
            f = self.formula()
            self.eat("]")
            self.eat("(")
            q = self.query()
            self.eat(")")
            return QGamma(items, tuple(keys), f, q)
        raise AlgParseError(f"unknown query head {head!r}")

    def item_list(self, end: str) -> tuple:
        items = []
        if self.peek() == end:
            return tuple(items)
        while True:
            e = self.expr()
            self.eat("as")
            items.append((e, self.ident()))
            if not self.try_eat(","):
                break
        return tuple(items)

    def formula(self) -> Formula:
        self._ws()
        if self.peek() == "(":
            self.eat("(")
            if self.try_eat("not "):
                f = FNot(self.formula())
                self.eat(")")
                return f
            # (f and f) / (f or f) / (e OP e)
            save = self.pos
            try:
                left_f = self.formula()
                if self.try_eat("and "):
                    f = FAnd(left_f, self.formula())
                    self.eat(")")
                    return f
                if self.try_eat("or "):
                    f = FOr(left_f, self.formula())
                    self.eat(")")
                    return f
            except AlgParseError:
                pass
            self.pos = save
            left = self.expr()
            op = self.pred_op()
            right = self.expr()
            self.eat(")")
            return FPred(op, left, right)
        head = self.ident()
        if head == "true":
            return FTrue()
        if head == "exists":
            self.eat("(")
            q = self.query()
            self.eat(")")
            return FExists(q)
        if head == "in":
            self.eat("[")
            items = self.item_list("]")
            self.eat("]")
            self.eat("(")
            q = self.query()
            self.eat(")")
            return FIn(items, q)
        if head in ("all", "any"):
            self.eat("(")
            op = self.pred_op()
            self.eat(",")
            e = self.expr()
            self.eat(",")
            q = self.query()
            self.eat(")")
            return FQuant(op, head, e, q)
        raise AlgParseError(f"unknown formula head {head!r}")

    def pred_op(self) -> str:
        for op in ("<>", "<=", ">=", "<", ">", "="):
            if self.try_eat(op):
                return op
        raise AlgParseError(f"expected predicate at {self.pos}")

    def expr(self) -> Expr:
        self._ws()
        ch = self.peek()
        if ch == "(":
            self.eat("(")
            if self.try_eat("- "):
                inner = self.expr()
                self.eat(")")
                return Fn("u-", (inner,))
            left = self.expr()
            for op in ("+", "-", "*", "/", "||"):
                if self.try_eat(op):
                    right = self.expr()
                    self.eat(")")
                    return Fn(op, (left, right))
            raise AlgParseError(f"expected function at {self.pos}")
        if ch == "'":
            self.eat("'")
            out = []
            while True:
                c = self.text[self.pos]
                self.pos += 1
                if c == "'":
                    if self.pos < len(self.text) and self.text[self.pos] == "'":
                        self.pos += 1
                        out.append("'")
                        continue
                    break
                out.append(c)
            return Const("".join(out))
        if ch.isdigit() or ch == "-":
            self._ws()
            start = self.pos
            if self.text[self.pos] == "-":
                self.pos += 1
            while self.pos < len(self.text) and (
                self.text[self.pos].isdigit() or self.text[self.pos] in ".eE+-"
            ):
                if self.text[self.pos] in "+-" and self.text[self.pos - 1] not in "eE":
                    break
                self.pos += 1
            tok = self.text[start : self.pos]
            return Const(float(tok) if any(c in tok for c in ".eE") else int(tok))
        name = self.ident()
        if name == "null":
            return Const(None)
        if name == "true":
            return Const(True)
        if name == "false":
            return Const(False)
        if name in AGG_FNS or name == "count":
            if self.peek() == "(":
                self.eat("(")
                if name == "count" and self.try_eat("*"):
                    self.eat(")")
                    return Agg("count_star", Const(1))
                arg = self.expr()
                self.eat(")")
                return Agg(name, arg)
        return Attr(name)


def parse_algebra(text: str) -> Query:
    p = _AlgParser(text)
    q = p.query()
    p._ws()
    if p.pos != len(p.text):
        raise AlgParseError(f"trailing input at {p.pos}")
    return q
