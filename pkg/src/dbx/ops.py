"""The operator vocabulary shared by the nested algebra, the calculus
stages and Imp, with one implementation over nested data and an
independent one over EJson.

Operators are dynamically typed: applying one to a value outside its
domain raises OpError.  On pipeline-produced programs this never
happens; fuzzed raw terms may trip it, which counts as "undefined" in
the rewrite-equivalence properties.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data_model import (
    Atom,
    Coll,
    EArr,
    EBool,
    EInt,
    ENum,
    EObj,
    EStr,
    EJson,
    Left,
    NraData,
    Rec,
    Right,
    data_sort_key,
    ejson_sort_key,
    value_order_key,
)


class OpError(Exception):
    """Dynamic type error while applying an operator."""


@dataclass(frozen=True, slots=True)
class Op:
    name: str
    params: tuple = ()

    def __str__(self):
        if not self.params:
            return self.name
        inner = ", ".join(
            p if isinstance(p, str) else str(list(p)) for p in self.params
        )
        return f"{self.name}<{inner}>"


# unary constructors
NOT = Op("not")
UMINUS = Op("uminus")
TO_FLOAT = Op("to_float")
COLL = Op("coll")
DISTINCT = Op("distinct")
COUNT = Op("count")
SUM = Op("sum")
MIN = Op("min")
MAX = Op("max")
FLATTEN = Op("flatten")
LEFT = Op("left")
RIGHT = Op("right")
FIRST = Op("first")


def DOT(label: str) -> Op:
    return Op("dot", (label,))


def REC(label: str) -> Op:
    return Op("rec", (label,))


def PROJECT(labels) -> Op:
    return Op("project", (tuple(labels),))


def GROUP_BY(g: str, labels) -> Op:
    return Op("group_by", (g, tuple(labels)))


# binary constructors
CONCAT = Op("concat")
UNION = Op("union")
MINUS = Op("minus")
INTER = Op("inter")
EQ = Op("eq")
MEM = Op("mem")
EQ_SQL = Op("eq_sql")
NEQ_SQL = Op("neq_sql")
LT = Op("lt")
LE = Op("le")
GT = Op("gt")
GE = Op("ge")
ADD = Op("add")
SUB = Op("sub")
MUL = Op("mul")
DIV = Op("div")
STRCAT = Op("strcat")

CMP_BY_PRED = {"=": EQ_SQL, "<>": NEQ_SQL, "<": LT, "<=": LE, ">": GT, ">=": GE}
ARITH_BY_FN = {"+": ADD, "-": SUB, "*": MUL, "/": DIV, "||": STRCAT}


def int_div(a: int, b: int) -> int:
    q = a // b
    if a % b != 0 and (a < 0) != (b < 0):
        q += 1
    return q


# ---------------------------------------------------------------------------
# Nested-data implementations
# ---------------------------------------------------------------------------


def _atom(d) -> object:
    if not isinstance(d, Atom):
        raise OpError(f"expected an atom, got {d!r}")
    return d.value


def _num(d):
    v = _atom(d)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise OpError(f"expected a number, got {v!r}")
    return v


def _coll(d) -> Coll:
    if not isinstance(d, Coll):
        raise OpError(f"expected a bag, got {d!r}")
    return d


def _rec(d) -> Rec:
    if not isinstance(d, Rec):
        raise OpError(f"expected a record, got {d!r}")
    return d


def _scalar_family(d):
    v = _atom(d)
    if isinstance(v, bool):
        return ("bool", v)
    if isinstance(v, (int, float)):
        return ("num", v)
    return ("text", v)


def _cmp_atoms(a, b):
    if isinstance(a, bool) and isinstance(b, bool):
        return (a > b) - (a < b)
    if (
        isinstance(a, (int, float))
        and isinstance(b, (int, float))
        and not isinstance(a, bool)
        and not isinstance(b, bool)
    ):
        return (a > b) - (a < b)
    if isinstance(a, str) and isinstance(b, str):
        return (a > b) - (a < b)
    raise OpError(f"incomparable atoms {a!r} and {b!r}")


def group_by_data(d: NraData, g: str, labels: tuple[str, ...]) -> Coll:
    """Built-in grouping: one record per distinct key (first-occurrence
    order) carrying the key fields and the group under label g."""
    rows = _coll(d)
    buckets: dict[tuple, tuple[Rec, list]] = {}
    for item in rows.items:
        r = _rec(item)
        for lbl in labels:
            if lbl not in r:
                raise OpError(f"grouping key {lbl!r} missing from {r!r}")
        key_rec = Rec((k, v) for k, v in r.fields if k in labels)
        key = data_sort_key(key_rec)
        if key not in buckets:
            buckets[key] = (key_rec, [])
        buckets[key][1].append(item)
    out = []
    for key_rec, members in buckets.values():
        if g in key_rec:
            raise OpError(f"group label {g!r} collides with a key")
        out.append(Rec(tuple(key_rec.fields) + ((g, Coll(members)),)))
    return Coll(out)


def apply_unary_data(op: Op, d: NraData) -> NraData:
    name = op.name
    if name == "not":
        v = _atom(d)
        if not isinstance(v, bool):
            raise OpError(f"not on {v!r}")
        return Atom(not v)
    if name == "uminus":
        return Atom(-_num(d))
    if name == "to_float":
        return Atom(float(_num(d)))
    if name == "coll":
        return Coll((d,))
    if name == "distinct":
        seen = set()
        out = []
        for x in _coll(d).items:
            k = data_sort_key(x)
            if k not in seen:
                seen.add(k)
                out.append(x)
        return Coll(out)
    if name == "count":
        return Atom(len(_coll(d).items))
    if name == "sum":
        total = 0
        for x in _coll(d).items:
            total = total + _num(x)
        return Atom(total)
    if name in ("min", "max"):
        vals = [_scalar_family(x) for x in _coll(d).items]
        if not vals:
            raise OpError(f"{name} of an empty bag")
        if len({fam for fam, _ in vals}) > 1:
            raise OpError(f"{name} over mixed atom families")
        picked = (min if name == "min" else max)(
            (v for _, v in vals), key=value_order_key
        )
        return Atom(picked)
    if name == "flatten":
        out = []
        for x in _coll(d).items:
            out.extend(_coll(x).items)
        return Coll(out)
    if name == "left":
        return Left(d)
    if name == "right":
        return Right(d)
    if name == "first":
        items = _coll(d).items
        if not items:
            raise OpError("first of an empty bag")
        return items[0]
    if name == "dot":
        r = _rec(d)
        (label,) = op.params
        if label not in r:
            raise OpError(f"missing field {label!r} in {r!r}")
        return r.get(label)
    if name == "rec":
        (label,) = op.params
        return Rec(((label, d),))
    if name == "project":
        r = _rec(d)
        (labels,) = op.params
        return Rec((k, v) for k, v in r.fields if k in labels)
    if name == "group_by":
        g, labels = op.params
        return group_by_data(d, g, labels)
    raise OpError(f"unknown unary operator {name}")


def apply_binary_data(op: Op, d1: NraData, d2: NraData) -> NraData:
    name = op.name
    if name == "concat":
        r1, r2 = _rec(d1), _rec(d2)
        merged = dict(r1.fields)
        merged.update(r2.fields)
        return Rec(merged.items())
    if name == "union":
        return Coll(_coll(d1).items + _coll(d2).items)
    if name in ("minus", "inter"):
        counts: dict = {}
        for x in _coll(d2).items:
            counts[data_sort_key(x)] = counts.get(data_sort_key(x), 0) + 1
        out = []
        for x in _coll(d1).items:
            k = data_sort_key(x)
            if counts.get(k, 0) > 0:
                counts[k] -= 1
                if name == "inter":
                    out.append(x)
            elif name == "minus":
                out.append(x)
        return Coll(out)
    if name == "eq":
        return Atom(d1 == d2)
    if name == "mem":
        return Atom(any(d1 == x for x in _coll(d2).items))
    if name in ("eq_sql", "neq_sql", "lt", "le", "gt", "ge"):
        c = _cmp_atoms(_atom(d1), _atom(d2))
        return Atom(
            {
                "eq_sql": c == 0,
                "neq_sql": c != 0,
                "lt": c < 0,
                "le": c <= 0,
                "gt": c > 0,
                "ge": c >= 0,
            }[name]
        )
    if name in ("add", "sub", "mul", "div"):
        a, b = _num(d1), _num(d2)
        if name == "add":
            return Atom(a + b)
        if name == "sub":
            return Atom(a - b)
        if name == "mul":
            return Atom(a * b)
        if b == 0:
            raise OpError("division by zero")
        if isinstance(a, int) and isinstance(b, int):
            return Atom(int_div(a, b))
        return Atom(float(a) / float(b))
    if name == "strcat":
        a, b = _atom(d1), _atom(d2)
        if not isinstance(a, str) or not isinstance(b, str):
            raise OpError(f"strcat on {a!r}, {b!r}")
        return Atom(a + b)
    raise OpError(f"unknown binary operator {name}")


def data_to_bool(d: NraData) -> bool:
    if isinstance(d, Atom) and isinstance(d.value, bool):
        return d.value
    raise OpError(f"expected a boolean, got {d!r}")


def data_to_list(d: NraData) -> tuple:
    return _coll(d).items


# ---------------------------------------------------------------------------
# EJson implementations
# ---------------------------------------------------------------------------


def _enum(e) -> float | int:
    if isinstance(e, ENum):
        return e.value
    if isinstance(e, EInt):
        return e.value
    raise OpError(f"expected an ejson number, got {e!r}")


def _earr(e) -> EArr:
    if not isinstance(e, EArr):
        raise OpError(f"expected an ejson array, got {e!r}")
    return e


def _eobj(e) -> EObj:
    if not isinstance(e, EObj):
        raise OpError(f"expected an ejson object, got {e!r}")
    return e


def _cmp_ejson_scalar(a: EJson, b: EJson):
    if isinstance(a, EBool) and isinstance(b, EBool):
        return (a.value > b.value) - (a.value < b.value)
    if isinstance(a, (EInt, ENum)) and isinstance(b, (EInt, ENum)):
        x, y = _enum(a), _enum(b)
        return (x > y) - (x < y)
    if isinstance(a, EStr) and isinstance(b, EStr):
        return (a.value > b.value) - (a.value < b.value)
    raise OpError(f"incomparable ejson scalars {a!r} and {b!r}")


def group_by_ejson(e: EJson, g: str, labels: tuple[str, ...]) -> EArr:
    arr = _earr(e)
    buckets: dict[tuple, tuple[EObj, list]] = {}
    for item in arr:
        o = _eobj(item)
        for lbl in labels:
            if lbl not in o:
                raise OpError(f"grouping key {lbl!r} missing from {o!r}")
        key_obj = EObj((k, v) for k, v in o.fields if k in labels)
        key = ejson_sort_key(key_obj)
        if key not in buckets:
            buckets[key] = (key_obj, [])
        buckets[key][1].append(item)
    out = []
    for key_obj, members in buckets.values():
        out.append(EObj(tuple(key_obj.fields) + ((g, EArr.of(members)),)))
    return EArr.of(out)


def apply_unary_ejson(op: Op, e: EJson) -> EJson:
    name = op.name
    if name == "not":
        if not isinstance(e, EBool):
            raise OpError(f"not on {e!r}")
        return EBool(not e.value)
    if name == "uminus":
        if isinstance(e, EInt):
            return EInt(-e.value)
        if isinstance(e, ENum):
            return ENum(-e.value)
        raise OpError(f"uminus on {e!r}")
    if name == "to_float":
        return ENum(float(_enum(e)))
    if name == "coll":
        return EArr.of((e,))
    if name == "distinct":
        seen = set()
        out = []
        for x in _earr(e):
            k = ejson_sort_key(x)
            if k not in seen:
                seen.add(k)
                out.append(x)
        return EArr.of(out)
    if name == "count":
        return EInt(len(_earr(e)))
    if name == "sum":
        items = list(_earr(e))
        if all(isinstance(x, EInt) for x in items):
            total = 0
            for x in items:
                total += x.value
            return EInt(total)
        total = 0.0
        for x in items:
            total += float(_enum(x))
        return ENum(total)
    if name in ("min", "max"):
        items = list(_earr(e))
        if not items:
            raise OpError(f"{name} of an empty array")
        keys = [_cmp_key_ejson(x) for x in items]
        if len({fam for fam, *_ in keys}) > 1:
            raise OpError(f"{name} over mixed scalar families")
        best = 0
        for i in range(1, len(items)):
            if (keys[i] < keys[best]) == (name == "min"):
                best = i
        return items[best]
    if name == "flatten":
        out = []
        for x in _earr(e):
            out.extend(_earr(x))
        return EArr.of(out)
    if name == "left":
        return EObj((("$left", e),))
    if name == "right":
        return EObj((("$right", e),))
    if name == "first":
        arr = _earr(e)
        if len(arr) == 0:
            raise OpError("first of an empty array")
        return arr.items()[0]
    if name == "dot":
        (label,) = op.params
        o = _eobj(e)
        if label not in o:
            raise OpError(f"missing key {label!r} in {o!r}")
        return o.get(label)
    if name == "rec":
        (label,) = op.params
        return EObj(((label, e),))
    if name == "project":
        (labels,) = op.params
        return EObj((k, v) for k, v in _eobj(e).fields if k in labels)
    if name == "group_by":
        g, labels = op.params
        return group_by_ejson(e, g, labels)
    raise OpError(f"unknown unary operator {name}")


def _cmp_key_ejson(e: EJson):
    """Family-tagged ordering key for min/max over scalars."""
    if isinstance(e, EBool):
        return ("bool", e.value)
    if isinstance(e, (EInt, ENum)):
        return ("num", _enum(e), 0 if isinstance(e, EInt) else 1)
    if isinstance(e, EStr):
        return ("text", e.value)
    raise OpError(f"expected a scalar, got {e!r}")


def apply_binary_ejson(op: Op, e1: EJson, e2: EJson) -> EJson:
    name = op.name
    if name == "concat":
        merged = dict(_eobj(e1).fields)
        merged.update(_eobj(e2).fields)
        return EObj(merged.items())
    if name == "union":
        # appending through the persistent-array push keeps the common
        # accumulate-one-element pattern amortized O(1)
        out = _earr(e1)
        for x in _earr(e2):
            out = out.push(x)
        return out
    if name in ("minus", "inter"):
        counts: dict = {}
        for x in _earr(e2):
            counts[ejson_sort_key(x)] = counts.get(ejson_sort_key(x), 0) + 1
        out = []
        for x in _earr(e1):
            k = ejson_sort_key(x)
            if counts.get(k, 0) > 0:
                counts[k] -= 1
                if name == "inter":
                    out.append(x)
            elif name == "minus":
                out.append(x)
        return EArr.of(out)
    if name == "eq":
        return EBool(e1 == e2)
    if name == "mem":
        return EBool(any(e1 == x for x in _earr(e2)))
    if name in ("eq_sql", "neq_sql", "lt", "le", "gt", "ge"):
        c = _cmp_ejson_scalar(e1, e2)
        return EBool(
            {
                "eq_sql": c == 0,
                "neq_sql": c != 0,
                "lt": c < 0,
                "le": c <= 0,
                "gt": c > 0,
                "ge": c >= 0,
            }[name]
        )
    if name in ("add", "sub", "mul", "div"):
        if isinstance(e1, EInt) and isinstance(e2, EInt):
            a, b = e1.value, e2.value
            if name == "add":
                return EInt(a + b)
            if name == "sub":
                return EInt(a - b)
            if name == "mul":
                return EInt(a * b)
            if b == 0:
                raise OpError("division by zero")
            return EInt(int_div(a, b))
        a, b = float(_enum(e1)), float(_enum(e2))
        if name == "add":
            return ENum(a + b)
        if name == "sub":
            return ENum(a - b)
        if name == "mul":
            return ENum(a * b)
        if b == 0.0:
            raise OpError("division by zero")
        return ENum(a / b)
    if name == "strcat":
        if not isinstance(e1, EStr) or not isinstance(e2, EStr):
            raise OpError(f"strcat on {e1!r}, {e2!r}")
        return EStr(e1.value + e2.value)
    raise OpError(f"unknown binary operator {name}")


def ejson_to_bool(e: EJson) -> bool:
    if isinstance(e, EBool):
        return e.value
    raise OpError(f"expected an ejson boolean, got {e!r}")


def ejson_to_list(e: EJson) -> list:
    return list(_earr(e))


# EJson runtime helpers used by the either lowering -------------------------


def ejson_either(e: EJson) -> EJson:
    o = _eobj(e)
    if "$left" in o:
        return EBool(True)
    if "$right" in o:
        return EBool(False)
    raise OpError(f"not an either value: {e!r}")


def ejson_get_left(e: EJson) -> EJson:
    o = _eobj(e)
    if "$left" not in o:
        raise OpError(f"not a left value: {e!r}")
    return o.get("$left")


def ejson_get_right(e: EJson) -> EJson:
    o = _eobj(e)
    if "$right" not in o:
        raise OpError(f"not a right value: {e!r}")
    return o.get("$right")


def data_either(d: NraData) -> NraData:
    if isinstance(d, Left):
        return Atom(True)
    if isinstance(d, Right):
        return Atom(False)
    raise OpError(f"not an either value: {d!r}")


def data_get_left(d: NraData) -> NraData:
    if not isinstance(d, Left):
        raise OpError(f"not a left value: {d!r}")
    return d.data


def data_get_right(d: NraData) -> NraData:
    if not isinstance(d, Right):
        raise OpError(f"not a right value: {d!r}")
    return d.data
