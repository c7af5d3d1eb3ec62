"""Imp: a minimal imperative language parameterized by a data model.

A program is one function taking the database record and returning a
result variable.  The language knows nothing about the values it moves
around: every operation goes through the instantiation's operator and
runtime-function tables, plus the two coercions to_bool / to_list used
by conditionals and loops.  All programs terminate (loops range over
finite collections; there is no recursion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import lowering as L
from . import ops
from .data_model import (
    Atom,
    Coll,
    EArr,
    EStr,
    EJson,
    InternalError,
    data_to_ejson,
)
from .lowering import (
    IAssign,
    IEither,
    IFor,
    IIf,
    ILet,
    ISeq,
    NBinop,
    NConst,
    NUnop,
    NVar,
    Nnrc,
    NnrsImpProgram,
)
from .ops import Op, OpError


class ImpExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class EConst(ImpExpr):
    value: object  # instantiation data


@dataclass(frozen=True, slots=True)
class EVar(ImpExpr):
    name: str


@dataclass(frozen=True, slots=True)
class EOp(ImpExpr):
    op: Op
    args: tuple


@dataclass(frozen=True, slots=True)
class ECall(ImpExpr):
    fn: str
    args: tuple


class ImpStmt:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class SBlock(ImpStmt):
    decls: tuple  # ((name, init-expr-or-None), ...)
    stmts: tuple


@dataclass(frozen=True, slots=True)
class SAssign(ImpStmt):
    var: str
    expr: ImpExpr


@dataclass(frozen=True, slots=True)
class SFor(ImpStmt):
    var: str
    src: ImpExpr
    body: ImpStmt


@dataclass(frozen=True, slots=True)
class SIf(ImpStmt):
    cond: ImpExpr
    then: ImpStmt
    els: ImpStmt


@dataclass(frozen=True)
class ImpFunction:
    name: str
    param: str
    body: SBlock
    ret: str


class ImpError(Exception):
    pass


@dataclass(frozen=True)
class ImpInstantiation:
    """Operator table, runtime-function table and the two coercions."""

    name: str
    apply_op: Callable
    apply_fn: Callable
    to_bool: Callable
    to_list: Callable


# ---------------------------------------------------------------------------
# The two instantiations
# ---------------------------------------------------------------------------


def _data_apply_op(op: Op, args: list):
    if len(args) == 1:
        return ops.apply_unary_data(op, args[0])
    if len(args) == 2:
        return ops.apply_binary_data(op, args[0], args[1])
    raise OpError(f"operator {op} applied to {len(args)} arguments")


def _data_apply_fn(fn: str, args: list):
    if fn == "either":
        return ops.data_either(args[0])
    if fn == "getLeft":
        return ops.data_get_left(args[0])
    if fn == "getRight":
        return ops.data_get_right(args[0])
    if fn == "group_by":
        coll, g, labels = args
        if not isinstance(g, Atom) or not isinstance(g.value, str):
            raise OpError("group_by label must be a string")
        names = tuple(x.value for x in labels.items)
        return ops.group_by_data(coll, g.value, names)
    if fn == "push":
        coll, v = args
        if not isinstance(coll, Coll):
            raise OpError(f"push into a non-bag: {coll!r}")
        return Coll(coll.items + (v,))
    if fn == "array":
        return Coll(tuple(args))
    raise OpError(f"unknown runtime function {fn}")


def _ejson_apply_op(op: Op, args: list):
    if len(args) == 1:
        return ops.apply_unary_ejson(op, args[0])
    if len(args) == 2:
        return ops.apply_binary_ejson(op, args[0], args[1])
    raise OpError(f"operator {op} applied to {len(args)} arguments")


def _ejson_apply_fn(fn: str, args: list):
    if fn == "either":
        return ops.ejson_either(args[0])
    if fn == "getLeft":
        return ops.ejson_get_left(args[0])
    if fn == "getRight":
        return ops.ejson_get_right(args[0])
    if fn == "group_by":
        coll, g, labels = args
        if not isinstance(g, EStr):
            raise OpError("group_by label must be a string")
        names = tuple(x.value for x in labels)
        return ops.group_by_ejson(coll, g.value, names)
    if fn == "push":
        coll, v = args
        if not isinstance(coll, EArr):
            raise OpError(f"push into a non-array: {coll!r}")
        return coll.push(v)
    if fn == "array":
        return EArr.of(args)
    raise OpError(f"unknown runtime function {fn}")


DATA_INSTANTIATION = ImpInstantiation(
    "data", _data_apply_op, _data_apply_fn, ops.data_to_bool, ops.data_to_list
)

EJSON_INSTANTIATION = ImpInstantiation(
    "ejson", _ejson_apply_op, _ejson_apply_fn, ops.ejson_to_bool, ops.ejson_to_list
)


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------

_UNASSIGNED = object()


def _eval_expr(e: ImpExpr, env: dict, inst: ImpInstantiation):
    if isinstance(e, EConst):
        return e.value
    if isinstance(e, EVar):
        v = env.get(e.name, _UNASSIGNED)
        if v is _UNASSIGNED:
            raise ImpError(f"read of unassigned or undeclared variable {e.name}")
        return v
    if isinstance(e, EOp):
        args = [_eval_expr(a, env, inst) for a in e.args]
        try:
            return inst.apply_op(e.op, args)
        except OpError as exc:
            raise ImpError(str(exc)) from exc
    if isinstance(e, ECall):
        args = [_eval_expr(a, env, inst) for a in e.args]
        try:
            return inst.apply_fn(e.fn, args)
        except OpError as exc:
            raise ImpError(str(exc)) from exc
    raise ImpError(f"not an expression: {e!r}")


def _exec(s: ImpStmt, env: dict, inst: ImpInstantiation):
    if isinstance(s, SBlock):
        saved = []
        for name, init in s.decls:
            saved.append((name, env.get(name, _UNASSIGNED), name in env))
            env[name] = (
                _UNASSIGNED if init is None else _eval_expr(init, env, inst)
            )
        for sub in s.stmts:
            _exec(sub, env, inst)
        for name, old, had in reversed(saved):
            if had:
                env[name] = old
            else:
                del env[name]
        return
    if isinstance(s, SAssign):
        if s.var not in env:
            raise ImpError(f"assignment to undeclared variable {s.var}")
        env[s.var] = _eval_expr(s.expr, env, inst)
        return
    if isinstance(s, SFor):
        src = _eval_expr(s.src, env, inst)
        try:
            items = inst.to_list(src)
        except OpError as exc:
            raise ImpError(str(exc)) from exc
        saved = env.get(s.var, _UNASSIGNED)
        had = s.var in env
        for x in items:
            env[s.var] = x
            _exec(s.body, env, inst)
        if had:
            env[s.var] = saved
        elif s.var in env:
            del env[s.var]
        return
    if isinstance(s, SIf):
        c = _eval_expr(s.cond, env, inst)
        try:
            b = inst.to_bool(c)
        except OpError as exc:
            raise ImpError(str(exc)) from exc
        _exec(s.then if b else s.els, env, inst)
        return
    raise ImpError(f"not a statement: {s!r}")


def eval_imp(fun: ImpFunction, inst: ImpInstantiation, value):
    """Run the function on one input and return the final value of the
    return variable.  The body is a block declaring the return variable;
    its value is read before the block scope would pop."""
    env = {fun.param: value}
    for name, init in fun.body.decls:
        env[name] = _UNASSIGNED if init is None else _eval_expr(init, env, inst)
    for sub in fun.body.stmts:
        _exec(sub, env, inst)
    out = env.get(fun.ret, _UNASSIGNED)
    if out is _UNASSIGNED:
        raise ImpError("return variable never assigned")
    return out


# ---------------------------------------------------------------------------
# Validator
# ---------------------------------------------------------------------------


def _expr_vars(e: ImpExpr) -> set:
    if isinstance(e, EVar):
        return {e.name}
    if isinstance(e, (EOp, ECall)):
        out: set = set()
        for a in e.args:
            out |= _expr_vars(a)
        return out
    return set()


def check_imp(fun: ImpFunction):
    def walk(s: ImpStmt, scope: frozenset):
        if isinstance(s, SBlock):
            inner = scope
            for name, init in s.decls:
                if init is not None:
                    _reads_ok(init, inner)
                inner = inner | {name}
            for sub in s.stmts:
                walk(sub, inner)
        elif isinstance(s, SAssign):
            if s.var not in scope:
                raise InternalError(f"assignment to out-of-scope {s.var}")
            _reads_ok(s.expr, scope)
        elif isinstance(s, SFor):
            _reads_ok(s.src, scope)
            walk(s.body, scope | {s.var})
        elif isinstance(s, SIf):
            _reads_ok(s.cond, scope)
            walk(s.then, scope)
            walk(s.els, scope)
        else:
            raise InternalError(f"not a statement: {s!r}")

    def _reads_ok(e: ImpExpr, scope: frozenset):
        missing = _expr_vars(e) - set(scope)
        if missing:
            raise InternalError(f"reads of out-of-scope names {missing}")

    walk(fun.body, frozenset({fun.param}))
    decl_names = {n for n, _ in fun.body.decls}
    if fun.ret not in decl_names:
        raise InternalError("return variable is not declared in the body")


# ---------------------------------------------------------------------------
# NNRSimp -> Imp(Data)
# ---------------------------------------------------------------------------


def _expr_to_imp(e: Nnrc) -> ImpExpr:
    if isinstance(e, NVar):
        return EVar(e.name)
    if isinstance(e, NConst):
        return EConst(e.value)
    if isinstance(e, NUnop):
        if e.op.name == "group_by":
            g, labels = e.op.params
            return ECall(
                "group_by",
                (
                    _expr_to_imp(e.arg),
                    EConst(Atom(g)),
                    EConst(Coll(tuple(Atom(l) for l in labels))),
                ),
            )
        return EOp(e.op, (_expr_to_imp(e.arg),))
    if isinstance(e, NBinop):
        return EOp(e.op, (_expr_to_imp(e.left), _expr_to_imp(e.right)))
    raise InternalError(f"not a basic expression: {e!r}")


def _stmt_to_imp(s) -> ImpStmt:
    if isinstance(s, ISeq):
        return SBlock((), tuple(_stmt_to_imp(sub) for sub in s.stmts))
    if isinstance(s, IAssign):
        return SAssign(s.var, _expr_to_imp(s.expr))
    if isinstance(s, ILet):
        init = None if s.init is None else _expr_to_imp(s.init)
        return SBlock(((s.var, init),), (_stmt_to_imp(s.body),))
    if isinstance(s, IFor):
        return SFor(s.var, _expr_to_imp(s.src), _stmt_to_imp(s.body))
    if isinstance(s, IIf):
        return SIf(_expr_to_imp(s.cond), _stmt_to_imp(s.then), _stmt_to_imp(s.els))
    if isinstance(s, IEither):
        scrut = _expr_to_imp(s.scrut)
        then = SBlock(
            ((s.left_var, ECall("getLeft", (scrut,))),),
            (_stmt_to_imp(s.on_left),),
        )
        els = SBlock(
            ((s.right_var, ECall("getRight", (scrut,))),),
            (_stmt_to_imp(s.on_right),),
        )
        return SIf(ECall("either", (scrut,)), then, els)
    raise InternalError(f"not a statement: {s!r}")


def nnrsimp_to_imp_data(p: NnrsImpProgram) -> ImpFunction:
    """Shape-preserving, except either-match which becomes a conditional
    over the either/getLeft/getRight runtime functions."""
    body = SBlock(((p.ret, None),), (_stmt_to_imp(p.body),))
    return ImpFunction("query", L.DB_VAR, body, p.ret)


# ---------------------------------------------------------------------------
# Imp(Data) -> Imp(EJson)
# ---------------------------------------------------------------------------


def _expr_data_to_ejson(e: ImpExpr) -> ImpExpr:
    if isinstance(e, EConst):
        return EConst(data_to_ejson(e.value))
    if isinstance(e, EVar):
        return e
    if isinstance(e, EOp):
        return EOp(e.op, tuple(_expr_data_to_ejson(a) for a in e.args))
    if isinstance(e, ECall):
        return ECall(e.fn, tuple(_expr_data_to_ejson(a) for a in e.args))
    raise InternalError(f"not an expression: {e!r}")


def _stmt_data_to_ejson(s: ImpStmt) -> ImpStmt:
    if isinstance(s, SBlock):
        decls = tuple(
            (n, None if init is None else _expr_data_to_ejson(init))
            for n, init in s.decls
        )
        return SBlock(decls, tuple(_stmt_data_to_ejson(x) for x in s.stmts))
    if isinstance(s, SAssign):
        return SAssign(s.var, _expr_data_to_ejson(s.expr))
    if isinstance(s, SFor):
        return SFor(s.var, _expr_data_to_ejson(s.src), _stmt_data_to_ejson(s.body))
    if isinstance(s, SIf):
        return SIf(
            _expr_data_to_ejson(s.cond),
            _stmt_data_to_ejson(s.then),
            _stmt_data_to_ejson(s.els),
        )
    raise InternalError(f"not a statement: {s!r}")


def imp_data_to_imp_ejson(fun: ImpFunction) -> ImpFunction:
    """Switch the data model: constants are re-encoded; operators and
    runtime calls keep their names and take their EJson counterparts
    from the EJson instantiation."""
    return ImpFunction(
        fun.name, fun.param, _stmt_data_to_ejson(fun.body), fun.ret
    )


# ---------------------------------------------------------------------------
# Pretty-printer (concrete syntax)
# ---------------------------------------------------------------------------


def print_imp_expr(e: ImpExpr, printer) -> str:
    if isinstance(e, EConst):
        return printer(e.value)
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EOp):
        return f"{e.op}({', '.join(print_imp_expr(a, printer) for a in e.args)})"
    if isinstance(e, ECall):
        return f"{e.fn}({', '.join(print_imp_expr(a, printer) for a in e.args)})"
    raise InternalError(f"not an expression: {e!r}")


def print_imp(fun: ImpFunction, data_printer=None) -> str:
    from .nrae import print_data
    from .data_model import ejson_to_text

    def default_printer(v):
        if isinstance(v, EJson):
            return ejson_to_text(v)
        return print_data(v)

    printer = data_printer or default_printer
    lines = [f"fun({fun.param}) {{"]

    def emit(s: ImpStmt, indent: int):
        pad = "  " * indent
        if isinstance(s, SBlock):
            for name, init in s.decls:
                if init is None:
                    lines.append(f"{pad}var {name};")
                else:
                    lines.append(f"{pad}var {name} = {print_imp_expr(init, printer)};")
            for sub in s.stmts:
                emit(sub, indent)
            return
        if isinstance(s, SAssign):
            lines.append(f"{pad}{s.var} = {print_imp_expr(s.expr, printer)};")
            return
        if isinstance(s, SFor):
            lines.append(f"{pad}for ({s.var} in {print_imp_expr(s.src, printer)}) {{")
            emit(s.body, indent + 1)
            lines.append(f"{pad}}}")
            return
        if isinstance(s, SIf):
            lines.append(f"{pad}if ({print_imp_expr(s.cond, printer)}) {{")
            emit(s.then, indent + 1)
            lines.append(f"{pad}}} else {{")
            emit(s.els, indent + 1)
            lines.append(f"{pad}}}")
            return

    emit(fun.body, 1)
    lines.append(f"  return {fun.ret};")
    lines.append("}")
    return "\n".join(lines)
