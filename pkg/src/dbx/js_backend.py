"""ECMAScript-6 emission from the EJson-instantiated imperative form.

A minimal target AST plus a deterministic printer.  Every operator and
runtime call goes through the runtime namespace `rt` (never native
operators), so big integers and numbers cannot mix silently.  The
emitted module exports a single query(db) function and expects the
runtime as ./dbx_runtime.cjs next to it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import imp as I
from .data_model import (
    EArr,
    EBool,
    EInt,
    ENum,
    EObj,
    EStr,
    EJson,
    InternalError,
    _ENull,
    format_number,
)

RUNTIME_REQUIRE = "./dbx_runtime.cjs"

JS_RESERVED = {
    "break", "case", "catch", "class", "const", "continue", "debugger",
    "default", "delete", "do", "else", "export", "extends", "finally",
    "for", "function", "if", "import", "in", "instanceof", "let", "new",
    "return", "super", "switch", "this", "throw", "try", "typeof", "var",
    "void", "while", "with", "yield", "db", "rt",
}


class JsNode:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class JId(JsNode):
    name: str


@dataclass(frozen=True, slots=True)
class JLit(JsNode):
    text: str  # already-rendered literal token


@dataclass(frozen=True, slots=True)
class JCall(JsNode):
    fn: JsNode
    args: tuple


@dataclass(frozen=True, slots=True)
class JMember(JsNode):
    obj: JsNode
    name: str


@dataclass(frozen=True, slots=True)
class JObject(JsNode):
    fields: tuple  # ((key, expr), ...)


@dataclass(frozen=True, slots=True)
class JArray(JsNode):
    items: tuple


@dataclass(frozen=True, slots=True)
class JLet(JsNode):
    name: str
    init: JsNode | None


@dataclass(frozen=True, slots=True)
class JAssign(JsNode):
    target: str
    expr: JsNode


@dataclass(frozen=True, slots=True)
class JForOf(JsNode):
    var: str
    src: JsNode
    body: tuple


@dataclass(frozen=True, slots=True)
class JIf(JsNode):
    cond: JsNode
    then: tuple
    els: tuple


@dataclass(frozen=True, slots=True)
class JBlock(JsNode):
    body: tuple


@dataclass(frozen=True, slots=True)
class JReturn(JsNode):
    expr: JsNode


@dataclass(frozen=True, slots=True)
class JRaw(JsNode):
    text: str


@dataclass(frozen=True, slots=True)
class JFunction(JsNode):
    name: str
    params: tuple
    body: tuple


@dataclass(frozen=True, slots=True)
class JModule(JsNode):
    items: tuple


def mangle(name: str) -> str:
    out = []
    for ch in name:
        if ch.isalnum() or ch in "_$":
            out.append(ch)
        else:
            out.append("_")
    ident = "".join(out)
    if not ident or ident[0].isdigit() or ident in JS_RESERVED:
        ident = "v$" + ident
    return ident


def rt_call(fn: str, *args: JsNode) -> JsNode:
    return JCall(JMember(JId("rt"), fn), tuple(args))


# ---------------------------------------------------------------------------
# EJson constants -> literal expressions
# ---------------------------------------------------------------------------


def ejson_literal(e: EJson) -> JsNode:
    if isinstance(e, _ENull):
        return JLit("null")
    if isinstance(e, EBool):
        return JLit("true" if e.value else "false")
    if isinstance(e, EInt):
        return JLit(f"{e.value}n")
    if isinstance(e, ENum):
        # integral doubles print bare; only bigints carry the n suffix
        return JLit(format_number(e.value))
    if isinstance(e, EStr):
        return JLit(json.dumps(e.value))
    if isinstance(e, EObj):
        return JObject(tuple((k, ejson_literal(v)) for k, v in e.fields))
    if isinstance(e, EArr):
        return rt_call("array", *[ejson_literal(x) for x in e])
    raise InternalError(f"not ejson: {e!r}")


# ---------------------------------------------------------------------------
# Imp(EJson) -> JS AST
# ---------------------------------------------------------------------------


def _expr(e: I.ImpExpr) -> JsNode:
    if isinstance(e, I.EConst):
        return ejson_literal(e.value)
    if isinstance(e, I.EVar):
        return JId(mangle(e.name))
    if isinstance(e, I.EOp):
        args = [_expr(a) for a in e.args]
        name = e.op.name
        if name == "dot":
            return rt_call("dot", args[0], JLit(json.dumps(e.op.params[0])))
        if name == "rec":
            return rt_call("rec", JLit(json.dumps(e.op.params[0])), args[0])
        if name == "project":
            labels = JArray(tuple(JLit(json.dumps(l)) for l in e.op.params[0]))
            return rt_call("project", args[0], labels)
        if name == "group_by":
            g, labels = e.op.params
            return rt_call(
                "group_by",
                args[0],
                JLit(json.dumps(g)),
                JArray(tuple(JLit(json.dumps(l)) for l in labels)),
            )
        return rt_call(name, *args)
    if isinstance(e, I.ECall):
        return rt_call(e.fn, *[_expr(a) for a in e.args])
    raise InternalError(f"not an expression: {e!r}")


def _stmts(s: I.ImpStmt) -> tuple:
    if isinstance(s, I.SBlock):
        body: list[JsNode] = []
        for name, init in s.decls:
            body.append(JLet(mangle(name), None if init is None else _expr(init)))
        for sub in s.stmts:
            body.extend(_stmts(sub))
        return (JBlock(tuple(body)),)
    if isinstance(s, I.SAssign):
        return (JAssign(mangle(s.var), _expr(s.expr)),)
    if isinstance(s, I.SFor):
        inner: tuple = ()
        for part in _stmts(s.body):
            inner += (part,)
        return (JForOf(mangle(s.var), rt_call("iter", _expr(s.src)), inner),)
    if isinstance(s, I.SIf):
        return (
            JIf(
                rt_call("toBool", _expr(s.cond)),
                _stmts(s.then),
                _stmts(s.els),
            ),
        )
    raise InternalError(f"not a statement: {s!r}")


def imp_to_js(fun: I.ImpFunction) -> JModule:
    body: list[JsNode] = []
    for name, init in fun.body.decls:
        body.append(JLet(mangle(name), None if init is None else _expr(init)))
    for sub in fun.body.stmts:
        body.extend(_stmts(sub))
    body.append(JReturn(JId(mangle(fun.ret))))
    function = JFunction("query", (mangle(fun.param),), tuple(body))
    return JModule(
        (
            JRaw('"use strict";'),
            JRaw(f'const rt = require("{RUNTIME_REQUIRE}");'),
            function,
            JRaw("module.exports = { query };"),
        )
    )


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def _print_expr(e: JsNode) -> str:
    if isinstance(e, JId):
        return e.name
    if isinstance(e, JLit):
        return e.text
    if isinstance(e, JCall):
        return f"{_print_expr(e.fn)}({', '.join(_print_expr(a) for a in e.args)})"
    if isinstance(e, JMember):
        return f"{_print_expr(e.obj)}.{e.name}"
    if isinstance(e, JObject):
        inner = ", ".join(f"{json.dumps(k)}: {_print_expr(v)}" for k, v in e.fields)
        return "{" + inner + "}"
    if isinstance(e, JArray):
        return "[" + ", ".join(_print_expr(x) for x in e.items) + "]"
    raise InternalError(f"not a js expression: {e!r}")


def _print_stmt(s: JsNode, indent: int, out: list):
    pad = "  " * indent
    if isinstance(s, JLet):
        if s.init is None:
            out.append(f"{pad}let {s.name};")
        else:
            out.append(f"{pad}let {s.name} = {_print_expr(s.init)};")
    elif isinstance(s, JAssign):
        out.append(f"{pad}{s.target} = {_print_expr(s.expr)};")
    elif isinstance(s, JForOf):
        out.append(f"{pad}for (const {s.var} of {_print_expr(s.src)}) {{")
        for sub in s.body:
            _print_stmt(sub, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, JIf):
        out.append(f"{pad}if ({_print_expr(s.cond)}) {{")
        for sub in s.then:
            _print_stmt(sub, indent + 1, out)
        out.append(f"{pad}}} else {{")
        for sub in s.els:
            _print_stmt(sub, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, JBlock):
        out.append(f"{pad}{{")
        for sub in s.body:
            _print_stmt(sub, indent + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, JReturn):
        out.append(f"{pad}return {_print_expr(s.expr)};")
    elif isinstance(s, JRaw):
        out.append(f"{pad}{s.text}")
    elif isinstance(s, JFunction):
        out.append(f"{pad}function {s.name}({', '.join(s.params)}) {{")
        for sub in s.body:
            _print_stmt(sub, indent + 1, out)
        out.append(f"{pad}}}")
    else:
        raise InternalError(f"not a js statement: {s!r}")


def print_js(module: JModule) -> str:
    out: list[str] = []
    for item in module.items:
        _print_stmt(item, 0, out)
    return "\n".join(out) + "\n"


def emit_js(fun: I.ImpFunction) -> str:
    return print_js(imp_to_js(fun))


# ---------------------------------------------------------------------------
# Grammar smoke check (balanced tokens outside string literals)
# ---------------------------------------------------------------------------


def balanced_tokens(src: str) -> bool:
    pairs = {")": "(", "]": "[", "}": "{"}
    stack: list[str] = []
    i = 0
    in_str: str | None = None
    while i < len(src):
        ch = src[i]
        if in_str:
            if ch == "\\":
                i += 2
                continue
            if ch == in_str:
                in_str = None
        elif ch in ("'", '"', "`"):
            in_str = ch
        elif ch in "([{":
            stack.append(ch)
        elif ch in ")]}":
            if not stack or stack.pop() != pairs[ch]:
                return False
        i += 1
    return not stack and in_str is None
