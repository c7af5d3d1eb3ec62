"""The functional-to-imperative descent.

Stages: the nested algebra is first named (NNRC, a calculus with
variables), then stratified (no loop/let/conditional nested inside an
operator application), then made statement-oriented (NNRS, with
write-only-then-read mutable variables in three namespaces), then
renamed cross-shadow-free, and finally collapsed to a single namespace
of mutable variables (NNRSimp).  Every stage has an interpreter and a
validator; translations are checked by interpreter agreement.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import nrae, ops
from .data_model import Coll, InternalError, NraData, Rec
from .data_model import Left as DLeft, Right as DRight
from .ops import Op, OpError

DB_VAR = "$db"
RET_VAR = "$ret"
ENV_VAR = "$env"


class LoweringError(InternalError):
    """A stage validator failed; indicates a compiler bug."""


class Gen:
    def __init__(self, prefix: str):
        self.prefix = prefix
        self.counter = itertools.count()

    def fresh(self) -> str:
        return f"{self.prefix}${next(self.counter)}"


# ---------------------------------------------------------------------------
# NNRC
# ---------------------------------------------------------------------------


class Nnrc:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class NVar(Nnrc):
    name: str


@dataclass(frozen=True, slots=True)
class NConst(Nnrc):
    value: NraData


@dataclass(frozen=True, slots=True)
class NLet(Nnrc):
    var: str
    bound: Nnrc
    body: Nnrc


@dataclass(frozen=True, slots=True)
class NFor(Nnrc):
    var: str
    src: Nnrc
    body: Nnrc


@dataclass(frozen=True, slots=True)
class NIf(Nnrc):
    cond: Nnrc
    then: Nnrc
    els: Nnrc


@dataclass(frozen=True, slots=True)
class NEither(Nnrc):
    scrut: Nnrc
    left_var: str
    on_left: Nnrc
    right_var: str
    on_right: Nnrc


@dataclass(frozen=True, slots=True)
class NUnop(Nnrc):
    op: Op
    arg: Nnrc


@dataclass(frozen=True, slots=True)
class NBinop(Nnrc):
    op: Op
    left: Nnrc
    right: Nnrc


class NnrcError(Exception):
    pass


def eval_nnrc(e: Nnrc, env: dict) -> NraData:
    if isinstance(e, NVar):
        if e.name not in env:
            raise NnrcError(f"unbound variable {e.name}")
        return env[e.name]
    if isinstance(e, NConst):
        return e.value
    if isinstance(e, NLet):
        return eval_nnrc(e.body, env | {e.var: eval_nnrc(e.bound, env)})
    if isinstance(e, NFor):
        src = eval_nnrc(e.src, env)
        if not isinstance(src, Coll):
            raise NnrcError(f"for over a non-bag: {src!r}")
        return Coll(eval_nnrc(e.body, env | {e.var: x}) for x in src.items)
    if isinstance(e, NIf):
        c = eval_nnrc(e.cond, env)
        try:
            b = ops.data_to_bool(c)
        except OpError as exc:
            raise NnrcError(str(exc)) from exc
        return eval_nnrc(e.then if b else e.els, env)
    if isinstance(e, NEither):
        v = eval_nnrc(e.scrut, env)
        if isinstance(v, DLeft):
            return eval_nnrc(e.on_left, env | {e.left_var: v.data})
        if isinstance(v, DRight):
            return eval_nnrc(e.on_right, env | {e.right_var: v.data})
        raise NnrcError(f"either over a non-tagged value: {v!r}")
    if isinstance(e, NUnop):
        try:
            return ops.apply_unary_data(e.op, eval_nnrc(e.arg, env))
        except OpError as exc:
            raise NnrcError(str(exc)) from exc
    if isinstance(e, NBinop):
        v1 = eval_nnrc(e.left, env)
        v2 = eval_nnrc(e.right, env)
        try:
            return ops.apply_binary_data(e.op, v1, v2)
        except OpError as exc:
            raise NnrcError(str(exc)) from exc
    raise NnrcError(f"not an expression: {e!r}")


def nnrc_free_vars(e: Nnrc, bound: frozenset = frozenset()) -> set:
    if isinstance(e, NVar):
        return set() if e.name in bound else {e.name}
    if isinstance(e, NConst):
        return set()
    if isinstance(e, NLet):
        return nnrc_free_vars(e.bound, bound) | nnrc_free_vars(
            e.body, bound | {e.var}
        )
    if isinstance(e, NFor):
        return nnrc_free_vars(e.src, bound) | nnrc_free_vars(e.body, bound | {e.var})
    if isinstance(e, NIf):
        return (
            nnrc_free_vars(e.cond, bound)
            | nnrc_free_vars(e.then, bound)
            | nnrc_free_vars(e.els, bound)
        )
    if isinstance(e, NEither):
        return (
            nnrc_free_vars(e.scrut, bound)
            | nnrc_free_vars(e.on_left, bound | {e.left_var})
            | nnrc_free_vars(e.on_right, bound | {e.right_var})
        )
    if isinstance(e, NUnop):
        return nnrc_free_vars(e.arg, bound)
    if isinstance(e, NBinop):
        return nnrc_free_vars(e.left, bound) | nnrc_free_vars(e.right, bound)
    raise NnrcError(f"not an expression: {e!r}")


EMPTY_BAG = NConst(Coll(()))


def nrae_to_nnrc(q: nrae.NraQuery, vin: str, venv: str, gen: Gen) -> Nnrc:
    """Name the combinators: composition becomes let, map becomes for,
    the environment combinators rebind the environment variable."""
    if isinstance(q, nrae.Const):
        return NConst(q.value)
    if isinstance(q, nrae.In):
        return NVar(vin)
    if isinstance(q, nrae.EnvQ):
        return NVar(venv)
    if isinstance(q, nrae.Db):
        return NVar(DB_VAR)
    if isinstance(q, nrae.Unary):
        return NUnop(q.op, nrae_to_nnrc(q.arg, vin, venv, gen))
    if isinstance(q, nrae.Binary):
        return NBinop(
            q.op,
            nrae_to_nnrc(q.left, vin, venv, gen),
            nrae_to_nnrc(q.right, vin, venv, gen),
        )
    if isinstance(q, nrae.Comp):
        x = gen.fresh()
        return NLet(x, nrae_to_nnrc(q.g, vin, venv, gen), nrae_to_nnrc(q.f, x, venv, gen))
    if isinstance(q, nrae.CompEnv):
        x = gen.fresh()
        return NLet(x, nrae_to_nnrc(q.g, vin, venv, gen), nrae_to_nnrc(q.f, vin, x, gen))
    if isinstance(q, nrae.Map):
        x = gen.fresh()
        return NFor(x, nrae_to_nnrc(q.src, vin, venv, gen), nrae_to_nnrc(q.body, x, venv, gen))
    if isinstance(q, nrae.Select):
        x = gen.fresh()
        body = NIf(
            nrae_to_nnrc(q.pred, x, venv, gen),
            NUnop(ops.COLL, NVar(x)),
            EMPTY_BAG,
        )
        return NUnop(ops.FLATTEN, NFor(x, nrae_to_nnrc(q.src, vin, venv, gen), body))
    if isinstance(q, nrae.Product):
        x1, x2 = gen.fresh(), gen.fresh()
        inner = NFor(
            x2,
            nrae_to_nnrc(q.right, vin, venv, gen),
            NBinop(ops.CONCAT, NVar(x1), NVar(x2)),
        )
        return NUnop(
            ops.FLATTEN, NFor(x1, nrae_to_nnrc(q.left, vin, venv, gen), inner)
        )
    if isinstance(q, nrae.Default):
        x = gen.fresh()
        return NLet(
            x,
            nrae_to_nnrc(q.left, vin, venv, gen),
            NIf(
                NBinop(ops.EQ, NVar(x), EMPTY_BAG),
                nrae_to_nnrc(q.right, vin, venv, gen),
                NVar(x),
            ),
        )
    if isinstance(q, nrae.Either):
        xl, xr = gen.fresh(), gen.fresh()
        return NEither(
            NVar(vin),
            xl,
            nrae_to_nnrc(q.on_left, xl, venv, gen),
            xr,
            nrae_to_nnrc(q.on_right, xr, venv, gen),
        )
    if isinstance(q, nrae.MapEnv):
        x = gen.fresh()
        return NFor(x, NVar(venv), nrae_to_nnrc(q.body, vin, x, gen))
    raise LoweringError(f"not a query: {q!r}")


def nnrc_of_query(q: nrae.NraQuery) -> Nnrc:
    """Top-level naming: the instance record is the initial input, the
    environment starts empty."""
    gen = Gen("x")
    return NLet(ENV_VAR, NConst(Rec(())), nrae_to_nnrc(q, DB_VAR, ENV_VAR, gen))


# ---------------------------------------------------------------------------
# NNRC(stratified)
# ---------------------------------------------------------------------------


def is_basic(e: Nnrc) -> bool:
    if isinstance(e, (NVar, NConst)):
        return True
    if isinstance(e, NUnop):
        return is_basic(e.arg)
    if isinstance(e, NBinop):
        return is_basic(e.left) and is_basic(e.right)
    return False


def is_stratified(e: Nnrc) -> bool:
    """No loop/let/conditional/match nested inside an operator
    application, nor as a loop source, condition or scrutinee."""
    if isinstance(e, (NVar, NConst)):
        return True
    if isinstance(e, NUnop):
        return is_basic(e.arg)
    if isinstance(e, NBinop):
        return is_basic(e.left) and is_basic(e.right)
    if isinstance(e, NLet):
        return is_stratified(e.bound) and is_stratified(e.body)
    if isinstance(e, NFor):
        return is_basic(e.src) and is_stratified(e.body)
    if isinstance(e, NIf):
        return is_basic(e.cond) and is_stratified(e.then) and is_stratified(e.els)
    if isinstance(e, NEither):
        return (
            is_basic(e.scrut)
            and is_stratified(e.on_left)
            and is_stratified(e.on_right)
        )
    return False


def stratify(e: Nnrc, gen: Gen | None = None) -> Nnrc:
    """Hoist complex sub-expressions out of operator applications (and
    out of loop-source/condition/scrutinee positions) with lets;
    temporaries are numbered in traversal order."""
    gen = gen or Gen("t")

    def hoist(sub: Nnrc, binds: list) -> Nnrc:
        if is_basic(sub):
            return sub
        t = gen.fresh()
        binds.append((t, sub))
        return NVar(t)

    def wrap(binds: list, body: Nnrc) -> Nnrc:
        for t, bound in reversed(binds):
            body = NLet(t, bound, body)
        return body

    if isinstance(e, (NVar, NConst)):
        return e
    if isinstance(e, NUnop):
        binds: list = []
        arg = hoist(stratify(e.arg, gen), binds)
        return wrap(binds, NUnop(e.op, arg))
    if isinstance(e, NBinop):
        binds = []
        left = hoist(stratify(e.left, gen), binds)
        right = hoist(stratify(e.right, gen), binds)
        return wrap(binds, NBinop(e.op, left, right))
    if isinstance(e, NLet):
        return NLet(e.var, stratify(e.bound, gen), stratify(e.body, gen))
    if isinstance(e, NFor):
        binds = []
        src = hoist(stratify(e.src, gen), binds)
        return wrap(binds, NFor(e.var, src, stratify(e.body, gen)))
    if isinstance(e, NIf):
        binds = []
        cond = hoist(stratify(e.cond, gen), binds)
        return wrap(binds, NIf(cond, stratify(e.then, gen), stratify(e.els, gen)))
    if isinstance(e, NEither):
        binds = []
        scrut = hoist(stratify(e.scrut, gen), binds)
        return wrap(
            binds,
            NEither(
                scrut,
                e.left_var,
                stratify(e.on_left, gen),
                e.right_var,
                stratify(e.on_right, gen),
            ),
        )
    raise LoweringError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# NNRS
# ---------------------------------------------------------------------------


class Nnrs:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class SSeq(Nnrs):
    stmts: tuple


@dataclass(frozen=True, slots=True)
class SAssign(Nnrs):
    var: str
    expr: Nnrc  # basic expression


@dataclass(frozen=True, slots=True)
class SPush(Nnrs):
    var: str
    expr: Nnrc


@dataclass(frozen=True, slots=True)
class SFor(Nnrs):
    var: str
    src: Nnrc
    body: Nnrs


@dataclass(frozen=True, slots=True)
class SIf(Nnrs):
    cond: Nnrc
    then: Nnrs
    els: Nnrs


@dataclass(frozen=True, slots=True)
class SEither(Nnrs):
    scrut: Nnrc
    left_var: str
    on_left: Nnrs
    right_var: str
    on_right: Nnrs


@dataclass(frozen=True, slots=True)
class SLetMut(Nnrs):
    """var is assignable in first, read-only (immutable) in second."""

    var: str
    first: Nnrs
    second: Nnrs


@dataclass(frozen=True, slots=True)
class SLetMutColl(Nnrs):
    """var accepts pushes in first, reads as a bag in second."""

    var: str
    first: Nnrs
    second: Nnrs


@dataclass(frozen=True)
class NnrsProgram:
    body: Nnrs
    ret: str


_UNASSIGNED = object()


class NnrsError(Exception):
    pass


def _eval_basic(e: Nnrc, imm: dict) -> NraData:
    try:
        return eval_nnrc(e, imm)
    except NnrcError as exc:
        raise NnrsError(str(exc)) from exc


def exec_nnrs(s: Nnrs, imm: dict, md: dict, mc: dict):
    if isinstance(s, SSeq):
        for sub in s.stmts:
            exec_nnrs(sub, imm, md, mc)
        return
    if isinstance(s, SAssign):
        if s.var not in md:
            raise NnrsError(f"assignment to non-mutable {s.var}")
        md[s.var] = _eval_basic(s.expr, imm)
        return
    if isinstance(s, SPush):
        if s.var not in mc:
            raise NnrsError(f"push to non-collection {s.var}")
        mc[s.var].append(_eval_basic(s.expr, imm))
        return
    if isinstance(s, SFor):
        src = _eval_basic(s.src, imm)
        if not isinstance(src, Coll):
            raise NnrsError(f"for over a non-bag: {src!r}")
        for x in src.items:
            exec_nnrs(s.body, imm | {s.var: x}, md, mc)
        return
    if isinstance(s, SIf):
        c = _eval_basic(s.cond, imm)
        try:
            b = ops.data_to_bool(c)
        except OpError as exc:
            raise NnrsError(str(exc)) from exc
        exec_nnrs(s.then if b else s.els, imm, md, mc)
        return
    if isinstance(s, SEither):
        v = _eval_basic(s.scrut, imm)
        if isinstance(v, DLeft):
            exec_nnrs(s.on_left, imm | {s.left_var: v.data}, md, mc)
            return
        if isinstance(v, DRight):
            exec_nnrs(s.on_right, imm | {s.right_var: v.data}, md, mc)
            return
        raise NnrsError(f"either over a non-tagged value: {v!r}")
    if isinstance(s, SLetMut):
        saved = md.get(s.var, _UNASSIGNED)
        had = s.var in md
        md[s.var] = _UNASSIGNED
        exec_nnrs(s.first, imm, md, mc)
        v = md.pop(s.var)
        if had:
            md[s.var] = saved
        if v is _UNASSIGNED:
            raise NnrsError(f"{s.var} never assigned before the phase barrier")
        exec_nnrs(s.second, imm | {s.var: v}, md, mc)
        return
    if isinstance(s, SLetMutColl):
        saved = mc.get(s.var)
        had = s.var in mc
        mc[s.var] = []
        exec_nnrs(s.first, imm, md, mc)
        items = mc.pop(s.var)
        if had:
            mc[s.var] = saved
        exec_nnrs(s.second, imm | {s.var: Coll(items)}, md, mc)
        return
    raise NnrsError(f"not a statement: {s!r}")


def eval_nnrs_program(p: NnrsProgram, db: NraData) -> NraData:
    md = {p.ret: _UNASSIGNED}
    exec_nnrs(p.body, {DB_VAR: db}, md, {})
    out = md[p.ret]
    if out is _UNASSIGNED:
        raise NnrsError("return variable never assigned")
    return out


def nnrc_to_nnrs(e: Nnrc, gen: Gen | None = None) -> NnrsProgram:
    """Continuation style: thread the variable that receives each
    sub-expression's value; loops accumulate through a mutable
    collection whose value is pushed per iteration."""
    if not is_stratified(e):
        raise LoweringError("nnrc_to_nnrs requires stratified input")
    gen = gen or Gen("c")

    def tr(e: Nnrc, sink) -> Nnrs:
        if is_basic(e):
            return sink(e)
        if isinstance(e, NLet):
            if isinstance(e.bound, NFor):
                loop = SFor(
                    e.bound.var,
                    e.bound.src,
                    tr(e.bound.body, lambda v: SPush(e.var, v)),
                )
                return SLetMutColl(e.var, loop, tr(e.body, sink))
            return SLetMut(
                e.var, tr(e.bound, lambda v: SAssign(e.var, v)), tr(e.body, sink)
            )
        if isinstance(e, NFor):
            t = gen.fresh()
            loop = SFor(e.var, e.src, tr(e.body, lambda v: SPush(t, v)))
            return SLetMutColl(t, loop, sink(NVar(t)))
        if isinstance(e, NIf):
            return SIf(e.cond, tr(e.then, sink), tr(e.els, sink))
        if isinstance(e, NEither):
            return SEither(
                e.scrut,
                e.left_var,
                tr(e.on_left, sink),
                e.right_var,
                tr(e.on_right, sink),
            )
        raise LoweringError(f"unexpected stratified form: {e!r}")

    body = tr(e, lambda v: SAssign(RET_VAR, v))
    return NnrsProgram(body, RET_VAR)


# ---------------------------------------------------------------------------
# NNRS validation (namespaces and phase discipline)
# ---------------------------------------------------------------------------


def check_nnrs(p: NnrsProgram):
    def expr_ok(e: Nnrc, imm: frozenset):
        missing = nnrc_free_vars(e) - set(imm)
        if missing:
            raise LoweringError(f"expression reads non-immutable names {missing}")
        if not is_basic(e):
            raise LoweringError(f"non-basic expression in statement: {e!r}")

    def walk(s: Nnrs, imm: frozenset, md: frozenset, mc: frozenset):
        if isinstance(s, SSeq):
            for sub in s.stmts:
                walk(sub, imm, md, mc)
        elif isinstance(s, SAssign):
            if s.var not in md:
                raise LoweringError(f"assign target {s.var} not mutable-data")
            expr_ok(s.expr, imm)
        elif isinstance(s, SPush):
            if s.var not in mc:
                raise LoweringError(f"push target {s.var} not mutable-collection")
            expr_ok(s.expr, imm)
        elif isinstance(s, SFor):
            expr_ok(s.src, imm)
            walk(s.body, imm | {s.var}, md, mc)
        elif isinstance(s, SIf):
            expr_ok(s.cond, imm)
            walk(s.then, imm, md, mc)
            walk(s.els, imm, md, mc)
        elif isinstance(s, SEither):
            expr_ok(s.scrut, imm)
            walk(s.on_left, imm | {s.left_var}, md, mc)
            walk(s.on_right, imm | {s.right_var}, md, mc)
        elif isinstance(s, SLetMut):
            walk(s.first, imm, md | {s.var}, mc)
            walk(s.second, imm | {s.var}, md, mc)
        elif isinstance(s, SLetMutColl):
            walk(s.first, imm, md, mc | {s.var})
            walk(s.second, imm | {s.var}, md, mc)
        else:
            raise LoweringError(f"not a statement: {s!r}")

    walk(p.body, frozenset({DB_VAR}), frozenset({p.ret}), frozenset())


# ---------------------------------------------------------------------------
# Cross-shadow-free renaming
# ---------------------------------------------------------------------------


def _collect_names(s: Nnrs, acc: set):
    if isinstance(s, SSeq):
        for sub in s.stmts:
            _collect_names(sub, acc)
    elif isinstance(s, (SAssign, SPush)):
        acc.add(s.var)
        acc.update(nnrc_free_vars(s.expr))
    elif isinstance(s, SFor):
        acc.add(s.var)
        acc.update(nnrc_free_vars(s.src))
        _collect_names(s.body, acc)
    elif isinstance(s, SIf):
        acc.update(nnrc_free_vars(s.cond))
        _collect_names(s.then, acc)
        _collect_names(s.els, acc)
    elif isinstance(s, SEither):
        acc.update(nnrc_free_vars(s.scrut))
        acc.add(s.left_var)
        acc.add(s.right_var)
        _collect_names(s.on_left, acc)
        _collect_names(s.on_right, acc)
    elif isinstance(s, (SLetMut, SLetMutColl)):
        acc.add(s.var)
        _collect_names(s.first, acc)
        _collect_names(s.second, acc)


def _subst_expr(e: Nnrc, x: str, y: str) -> Nnrc:
    if isinstance(e, NVar):
        return NVar(y) if e.name == x else e
    if isinstance(e, NConst):
        return e
    if isinstance(e, NUnop):
        return NUnop(e.op, _subst_expr(e.arg, x, y))
    if isinstance(e, NBinop):
        return NBinop(e.op, _subst_expr(e.left, x, y), _subst_expr(e.right, x, y))
    raise LoweringError(f"non-basic expression in statement: {e!r}")


def _subst_imm(s: Nnrs, x: str, y: str) -> Nnrs:
    """Rename reads of immutable x, stopping at inner imm re-binders."""
    if isinstance(s, SSeq):
        return SSeq(tuple(_subst_imm(sub, x, y) for sub in s.stmts))
    if isinstance(s, SAssign):
        return SAssign(s.var, _subst_expr(s.expr, x, y))
    if isinstance(s, SPush):
        return SPush(s.var, _subst_expr(s.expr, x, y))
    if isinstance(s, SFor):
        src = _subst_expr(s.src, x, y)
        body = s.body if s.var == x else _subst_imm(s.body, x, y)
        return SFor(s.var, src, body)
    if isinstance(s, SIf):
        return SIf(
            _subst_expr(s.cond, x, y),
            _subst_imm(s.then, x, y),
            _subst_imm(s.els, x, y),
        )
    if isinstance(s, SEither):
        return SEither(
            _subst_expr(s.scrut, x, y),
            s.left_var,
            s.on_left if s.left_var == x else _subst_imm(s.on_left, x, y),
            s.right_var,
            s.on_right if s.right_var == x else _subst_imm(s.on_right, x, y),
        )
    if isinstance(s, (SLetMut, SLetMutColl)):
        first = _subst_imm(s.first, x, y)
        second = s.second if s.var == x else _subst_imm(s.second, x, y)
        return type(s)(s.var, first, second)
    raise LoweringError(f"not a statement: {s!r}")


def _subst_mut(s: Nnrs, x: str, y: str, coll: bool) -> Nnrs:
    """Rename mutable targets of x (data or collection namespace),
    stopping at inner re-binders in the same namespace."""
    binder = SLetMutColl if coll else SLetMut
    if isinstance(s, SSeq):
        return SSeq(tuple(_subst_mut(sub, x, y, coll) for sub in s.stmts))
    if isinstance(s, SAssign):
        if not coll and s.var == x:
            return SAssign(y, s.expr)
        return s
    if isinstance(s, SPush):
        if coll and s.var == x:
            return SPush(y, s.expr)
        return s
    if isinstance(s, SFor):
        return SFor(s.var, s.src, _subst_mut(s.body, x, y, coll))
    if isinstance(s, SIf):
        return SIf(s.cond, _subst_mut(s.then, x, y, coll), _subst_mut(s.els, x, y, coll))
    if isinstance(s, SEither):
        return SEither(
            s.scrut,
            s.left_var,
            _subst_mut(s.on_left, x, y, coll),
            s.right_var,
            _subst_mut(s.on_right, x, y, coll),
        )
    if isinstance(s, (SLetMut, SLetMutColl)):
        first = s.first
        if not (isinstance(s, binder) and s.var == x):
            first = _subst_mut(first, x, y, coll)
        second = _subst_mut(s.second, x, y, coll)
        return type(s)(s.var, first, second)
    raise LoweringError(f"not a statement: {s!r}")


def uncross_shadow(p: NnrsProgram) -> NnrsProgram:
    """Rename binders so no name is simultaneously live in two different
    namespaces; renaming is minimal and deterministic (numeric suffix in
    traversal order)."""
    used: set = {DB_VAR, p.ret}
    _collect_names(p.body, used)

    def freshen(x: str) -> str:
        n = 0
        while f"{x}${n}" in used:
            n += 1
        out = f"{x}${n}"
        used.add(out)
        return out

    def walk(s: Nnrs, imm: frozenset, md: frozenset, mc: frozenset) -> Nnrs:
        if isinstance(s, SSeq):
            return SSeq(tuple(walk(sub, imm, md, mc) for sub in s.stmts))
        if isinstance(s, (SAssign, SPush)):
            return s
        if isinstance(s, SFor):
            var, body = s.var, s.body
            if var in md or var in mc:
                new = freshen(var)
                body = _subst_imm(body, var, new)
                var = new
            return SFor(var, s.src, walk(body, imm | {var}, md, mc))
        if isinstance(s, SIf):
            return SIf(s.cond, walk(s.then, imm, md, mc), walk(s.els, imm, md, mc))
        if isinstance(s, SEither):
            lv, lb = s.left_var, s.on_left
            if lv in md or lv in mc:
                new = freshen(lv)
                lb = _subst_imm(lb, lv, new)
                lv = new
            rv, rb = s.right_var, s.on_right
            if rv in md or rv in mc:
                new = freshen(rv)
                rb = _subst_imm(rb, rv, new)
                rv = new
            return SEither(
                s.scrut, lv, walk(lb, imm | {lv}, md, mc), rv, walk(rb, imm | {rv}, md, mc)
            )
        if isinstance(s, (SLetMut, SLetMutColl)):
            coll = isinstance(s, SLetMutColl)
            var, first, second = s.var, s.first, s.second
            other = (imm | mc) if not coll else (imm | md)
            conflict_first = var in other
            conflict_second = var in md or var in mc
            if conflict_first or conflict_second:
                new = freshen(var)
                first = _subst_mut(first, var, new, coll)
                second = _subst_imm(second, var, new)
                var = new
            if coll:
                first = walk(first, imm, md, mc | {var})
            else:
                first = walk(first, imm, md | {var}, mc)
            second = walk(second, imm | {var}, md, mc)
            return type(s)(var, first, second)
        raise LoweringError(f"not a statement: {s!r}")

    return NnrsProgram(
        walk(p.body, frozenset({DB_VAR}), frozenset({p.ret}), frozenset()), p.ret
    )


def check_cross_shadow_free(p: NnrsProgram):
    def walk(s: Nnrs, imm: frozenset, md: frozenset, mc: frozenset):
        def enter(name: str, ns: str):
            others = {
                "imm": md | mc,
                "md": imm | mc,
                "mc": imm | md,
            }[ns]
            if name in others:
                raise LoweringError(
                    f"{name} is live in two namespaces at once"
                )

        if isinstance(s, SSeq):
            for sub in s.stmts:
                walk(sub, imm, md, mc)
        elif isinstance(s, (SAssign, SPush)):
            pass
        elif isinstance(s, SFor):
            enter(s.var, "imm")
            walk(s.body, imm | {s.var}, md, mc)
        elif isinstance(s, SIf):
            walk(s.then, imm, md, mc)
            walk(s.els, imm, md, mc)
        elif isinstance(s, SEither):
            enter(s.left_var, "imm")
            walk(s.on_left, imm | {s.left_var}, md, mc)
            enter(s.right_var, "imm")
            walk(s.on_right, imm | {s.right_var}, md, mc)
        elif isinstance(s, SLetMut):
            enter(s.var, "md")
            walk(s.first, imm, md | {s.var}, mc)
            enter(s.var, "imm")
            walk(s.second, imm | {s.var}, md, mc)
        elif isinstance(s, SLetMutColl):
            enter(s.var, "mc")
            walk(s.first, imm, md, mc | {s.var})
            enter(s.var, "imm")
            walk(s.second, imm | {s.var}, md, mc)
        else:
            raise LoweringError(f"not a statement: {s!r}")

    walk(p.body, frozenset({DB_VAR}), frozenset({p.ret}), frozenset())


# ---------------------------------------------------------------------------
# NNRSimp
# ---------------------------------------------------------------------------


class NnrsImp:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class ISeq(NnrsImp):
    stmts: tuple


@dataclass(frozen=True, slots=True)
class IAssign(NnrsImp):
    var: str
    expr: Nnrc


@dataclass(frozen=True, slots=True)
class ILet(NnrsImp):
    var: str
    init: Nnrc | None
    body: NnrsImp


@dataclass(frozen=True, slots=True)
class IFor(NnrsImp):
    var: str
    src: Nnrc
    body: NnrsImp


@dataclass(frozen=True, slots=True)
class IIf(NnrsImp):
    cond: Nnrc
    then: NnrsImp
    els: NnrsImp


@dataclass(frozen=True, slots=True)
class IEither(NnrsImp):
    scrut: Nnrc
    left_var: str
    on_left: NnrsImp
    right_var: str
    on_right: NnrsImp


@dataclass(frozen=True)
class NnrsImpProgram:
    body: NnrsImp
    ret: str


class NnrsImpError(Exception):
    pass


def nnrs_to_nnrsimp(p: NnrsProgram) -> NnrsImpProgram:
    """Collapse the namespaces: both let-mut forms become a single
    mutable let (collections start from the empty bag, pushes become
    append-a-singleton)."""
    check_cross_shadow_free(p)

    def tr(s: Nnrs) -> NnrsImp:
        if isinstance(s, SSeq):
            return ISeq(tuple(tr(sub) for sub in s.stmts))
        if isinstance(s, SAssign):
            return IAssign(s.var, s.expr)
        if isinstance(s, SPush):
            return IAssign(
                s.var, NBinop(ops.UNION, NVar(s.var), NUnop(ops.COLL, s.expr))
            )
        if isinstance(s, SFor):
            return IFor(s.var, s.src, tr(s.body))
        if isinstance(s, SIf):
            return IIf(s.cond, tr(s.then), tr(s.els))
        if isinstance(s, SEither):
            return IEither(s.scrut, s.left_var, tr(s.on_left), s.right_var, tr(s.on_right))
        if isinstance(s, SLetMut):
            return ILet(s.var, None, ISeq((tr(s.first), tr(s.second))))
        if isinstance(s, SLetMutColl):
            return ILet(s.var, EMPTY_BAG, ISeq((tr(s.first), tr(s.second))))
        raise LoweringError(f"not a statement: {s!r}")

    return NnrsImpProgram(tr(p.body), p.ret)


def exec_nnrsimp(s: NnrsImp, env: dict):
    if isinstance(s, ISeq):
        for sub in s.stmts:
            exec_nnrsimp(sub, env)
        return
    if isinstance(s, IAssign):
        if s.var not in env:
            raise NnrsImpError(f"assignment to undeclared {s.var}")
        env[s.var] = _eval_scoped(s.expr, env)
        return
    if isinstance(s, ILet):
        saved = env.get(s.var, _UNASSIGNED)
        had = s.var in env
        env[s.var] = _UNASSIGNED if s.init is None else _eval_scoped(s.init, env)
        exec_nnrsimp(s.body, env)
        if had:
            env[s.var] = saved
        else:
            del env[s.var]
        return
    if isinstance(s, IFor):
        src = _eval_scoped(s.src, env)
        if not isinstance(src, Coll):
            raise NnrsImpError(f"for over a non-bag: {src!r}")
        saved = env.get(s.var, _UNASSIGNED)
        had = s.var in env
        for x in src.items:
            env[s.var] = x
            exec_nnrsimp(s.body, env)
        if had:
            env[s.var] = saved
        elif s.var in env:
            del env[s.var]
        return
    if isinstance(s, IIf):
        c = _eval_scoped(s.cond, env)
        try:
            b = ops.data_to_bool(c)
        except OpError as exc:
            raise NnrsImpError(str(exc)) from exc
        exec_nnrsimp(s.then if b else s.els, env)
        return
    if isinstance(s, IEither):
        v = _eval_scoped(s.scrut, env)
        if isinstance(v, DLeft):
            var, branch, payload = s.left_var, s.on_left, v.data
        elif isinstance(v, DRight):
            var, branch, payload = s.right_var, s.on_right, v.data
        else:
            raise NnrsImpError(f"either over a non-tagged value: {v!r}")
        saved = env.get(var, _UNASSIGNED)
        had = var in env
        env[var] = payload
        exec_nnrsimp(branch, env)
        if had:
            env[var] = saved
        else:
            del env[var]
        return
    raise NnrsImpError(f"not a statement: {s!r}")


def _eval_scoped(e: Nnrc, env: dict) -> NraData:
    for name in nnrc_free_vars(e):
        if env.get(name, _UNASSIGNED) is _UNASSIGNED:
            raise NnrsImpError(f"read of unassigned variable {name}")
    try:
        return eval_nnrc(e, env)
    except NnrcError as exc:
        raise NnrsImpError(str(exc)) from exc


def eval_nnrsimp_program(p: NnrsImpProgram, db: NraData) -> NraData:
    env = {DB_VAR: db, p.ret: _UNASSIGNED}
    exec_nnrsimp(p.body, env)
    out = env[p.ret]
    if out is _UNASSIGNED:
        raise NnrsImpError("return variable never assigned")
    return out


def check_nnrsimp(p: NnrsImpProgram):
    def walk(s: NnrsImp, scope: frozenset):
        if isinstance(s, ISeq):
            for sub in s.stmts:
                walk(sub, scope)
        elif isinstance(s, IAssign):
            if s.var not in scope:
                raise LoweringError(f"assignment to out-of-scope {s.var}")
            _reads_ok(s.expr, scope)
        elif isinstance(s, ILet):
            if s.init is not None:
                _reads_ok(s.init, scope)
            walk(s.body, scope | {s.var})
        elif isinstance(s, IFor):
            _reads_ok(s.src, scope)
            walk(s.body, scope | {s.var})
        elif isinstance(s, IIf):
            _reads_ok(s.cond, scope)
            walk(s.then, scope)
            walk(s.els, scope)
        elif isinstance(s, IEither):
            _reads_ok(s.scrut, scope)
            walk(s.on_left, scope | {s.left_var})
            walk(s.on_right, scope | {s.right_var})
        else:
            raise LoweringError(f"not a statement: {s!r}")

    def _reads_ok(e: Nnrc, scope: frozenset):
        missing = nnrc_free_vars(e) - set(scope)
        if missing:
            raise LoweringError(f"reads of out-of-scope names {missing}")

    walk(p.body, frozenset({DB_VAR, p.ret}))


# ---------------------------------------------------------------------------
# Pretty-printers
# ---------------------------------------------------------------------------


def print_nnrc(e: Nnrc, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(e, NVar):
        return e.name
    if isinstance(e, NConst):
        return nrae.print_data(e.value)
    if isinstance(e, NLet):
        return (
            f"let {e.var} = {print_nnrc(e.bound, indent)} in\n"
            f"{pad}{print_nnrc(e.body, indent)}"
        )
    if isinstance(e, NFor):
        return (
            f"for ({e.var} in {print_nnrc(e.src, indent)}) {{ "
            f"{print_nnrc(e.body, indent)} }}"
        )
    if isinstance(e, NIf):
        return (
            f"if {print_nnrc(e.cond, indent)} then {print_nnrc(e.then, indent)} "
            f"else {print_nnrc(e.els, indent)}"
        )
    if isinstance(e, NEither):
        return (
            f"match {print_nnrc(e.scrut, indent)} with left {e.left_var} => "
            f"{print_nnrc(e.on_left, indent)} | right {e.right_var} => "
            f"{print_nnrc(e.on_right, indent)}"
        )
    if isinstance(e, NUnop):
        if e.op.name == "dot":
            return f"{print_nnrc(e.arg, indent)}.{e.op.params[0]}"
        return f"{e.op}({print_nnrc(e.arg, indent)})"
    if isinstance(e, NBinop):
        return f"{e.op}({print_nnrc(e.left, indent)}, {print_nnrc(e.right, indent)})"
    raise LoweringError(f"not an expression: {e!r}")


def print_nnrs(p: NnrsProgram) -> str:
    lines: list[str] = []

    def emit(s: Nnrs, indent: int):
        pad = "  " * indent
        if isinstance(s, SSeq):
            for sub in s.stmts:
                emit(sub, indent)
        elif isinstance(s, SAssign):
            lines.append(f"{pad}{s.var} := {print_nnrc(s.expr)};")
        elif isinstance(s, SPush):
            lines.append(f"{pad}push({s.var}, {print_nnrc(s.expr)});")
        elif isinstance(s, SFor):
            lines.append(f"{pad}for ({s.var} in {print_nnrc(s.src)}) {{")
            emit(s.body, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, SIf):
            lines.append(f"{pad}if ({print_nnrc(s.cond)}) {{")
            emit(s.then, indent + 1)
            lines.append(f"{pad}}} else {{")
            emit(s.els, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, SEither):
            lines.append(f"{pad}either ({print_nnrc(s.scrut)}) {{")
            lines.append(f"{pad}  left {s.left_var} => {{")
            emit(s.on_left, indent + 2)
            lines.append(f"{pad}  }}")
            lines.append(f"{pad}  right {s.right_var} => {{")
            emit(s.on_right, indent + 2)
            lines.append(f"{pad}  }}")
            lines.append(f"{pad}}}")
        elif isinstance(s, SLetMut):
            lines.append(f"{pad}letMut {s.var} from {{")
            emit(s.first, indent + 1)
            lines.append(f"{pad}}};")
            emit(s.second, indent)
        elif isinstance(s, SLetMutColl):
            lines.append(f"{pad}letMutColl {s.var} from {{")
            emit(s.first, indent + 1)
            lines.append(f"{pad}}};")
            emit(s.second, indent)

    emit(p.body, 0)
    lines.append(f"return {p.ret};")
    return "\n".join(lines)


def print_nnrsimp(p: NnrsImpProgram) -> str:
    lines: list[str] = []

    def emit(s: NnrsImp, indent: int):
        pad = "  " * indent
        if isinstance(s, ISeq):
            for sub in s.stmts:
                emit(sub, indent)
        elif isinstance(s, IAssign):
            lines.append(f"{pad}{s.var} := {print_nnrc(s.expr)};")
        elif isinstance(s, ILet):
            if s.init is None:
                lines.append(f"{pad}var {s.var};")
            else:
                lines.append(f"{pad}var {s.var} = {print_nnrc(s.init)};")
            emit(s.body, indent)
        elif isinstance(s, IFor):
            lines.append(f"{pad}for ({s.var} in {print_nnrc(s.src)}) {{")
            emit(s.body, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, IIf):
            lines.append(f"{pad}if ({print_nnrc(s.cond)}) {{")
            emit(s.then, indent + 1)
            lines.append(f"{pad}}} else {{")
            emit(s.els, indent + 1)
            lines.append(f"{pad}}}")
        elif isinstance(s, IEither):
            lines.append(f"{pad}either ({print_nnrc(s.scrut)}) {{")
            lines.append(f"{pad}  left {s.left_var} => {{")
            emit(s.on_left, indent + 2)
            lines.append(f"{pad}  }}")
            lines.append(f"{pad}  right {s.right_var} => {{")
            emit(s.on_right, indent + 2)
            lines.append(f"{pad}  }}")
            lines.append(f"{pad}}}")

    emit(p.body, 0)
    lines.append(f"return {p.ret};")
    return "\n".join(lines)
