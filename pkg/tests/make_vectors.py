"""Generate the shared runtime test-vector file.

Run as: python3 tests/make_vectors.py

Each vector applies one runtime function of the EJson instantiation to
encoded arguments; the JavaScript runtime's test suite replays the same
file.  Values use a tagged encoding so numbers and big integers stay
distinct in the JSON text.
"""

import json
import pathlib
import random
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from dbx import ops
from dbx.data_model import (
    EArr,
    EBool,
    EInt,
    ENULL,
    ENum,
    EObj,
    EStr,
    EJson,
    data_to_ejson,
)
from dbx.fuzz import gen_data
from dbx.ops import Op, OpError


def enc(e: EJson):
    if e is ENULL or e.__class__.__name__ == "_ENull":
        return ["null"]
    if isinstance(e, EBool):
        return ["bool", e.value]
    if isinstance(e, ENum):
        return ["num", e.value]
    if isinstance(e, EInt):
        return ["int", str(e.value)]
    if isinstance(e, EStr):
        return ["str", e.value]
    if isinstance(e, EObj):
        return ["obj", [[k, enc(v)] for k, v in e.fields]]
    if isinstance(e, EArr):
        return ["arr", [enc(x) for x in e]]
    raise TypeError(e)


def dec(v) -> EJson:
    tag = v[0]
    if tag == "null":
        return ENULL
    if tag == "bool":
        return EBool(v[1])
    if tag == "num":
        return ENum(v[1])
    if tag == "int":
        return EInt(int(v[1]))
    if tag == "str":
        return EStr(v[1])
    if tag == "obj":
        return EObj((k, dec(x)) for k, x in v[1])
    if tag == "arr":
        return EArr.of(dec(x) for x in v[1])
    raise TypeError(v)


def apply_fn(fn: str, args: list[EJson]):
    """Apply a runtime-namespace function the way emitted code calls it."""
    unary = {
        "not", "uminus", "to_float", "coll", "distinct", "count", "sum",
        "min", "max", "flatten", "left", "right", "first",
    }
    binary = {
        "concat", "union", "minus", "inter", "eq", "mem", "eq_sql",
        "neq_sql", "lt", "le", "gt", "ge", "add", "sub", "mul", "div",
        "strcat",
    }
    if fn in unary:
        return ops.apply_unary_ejson(Op(fn), args[0])
    if fn in binary:
        return ops.apply_binary_ejson(Op(fn), args[0], args[1])
    if fn == "dot":
        return ops.apply_unary_ejson(Op("dot", (args[1].value,)), args[0])
    if fn == "rec":
        return ops.apply_unary_ejson(Op("rec", (args[0].value,)), args[1])
    if fn == "project":
        labels = tuple(x.value for x in args[1])
        return ops.apply_unary_ejson(Op("project", (labels,)), args[0])
    if fn == "group_by":
        labels = tuple(x.value for x in args[2])
        return ops.apply_unary_ejson(Op("group_by", (args[1].value, labels)), args[0])
    if fn == "either":
        return ops.ejson_either(args[0])
    if fn == "getLeft":
        return ops.ejson_get_left(args[0])
    if fn == "getRight":
        return ops.ejson_get_right(args[0])
    if fn == "push":
        return args[0].push(args[1])
    if fn == "array":
        return EArr.of(args)
    if fn == "iter":
        return EArr.of(args[0])
    if fn == "toBool":
        return EBool(ops.ejson_to_bool(args[0]))
    raise KeyError(fn)


def build_vectors():
    rng = random.Random(2024)

    def ej(depth=3):
        return data_to_ejson(gen_data(rng, depth))

    def num():
        return rng.choice([EInt(rng.randint(-9, 9)), ENum(rng.randint(-32, 32) / 8.0)])

    def scalar():
        return rng.choice([num(), EStr(rng.choice(["", "a", "ab"])), EBool(rng.random() < 0.5)])

    def arr_of(f, n=None):
        n = rng.randint(0, 4) if n is None else n
        return EArr.of(f() for _ in range(n))

    def obj():
        labels = rng.sample(["a", "b", "c", "k.q"], rng.randint(0, 3))
        return EObj((l, ej(1)) for l in labels)

    def boxed():
        if rng.random() < 0.5:
            return EObj((("$left", scalar()),))
        return EObj((("$right", ENULL),))

    cases: list[tuple[str, list[EJson]]] = []

    def add(fn, *args):
        cases.append((fn, list(args)))

    for _ in range(6):
        add("not", EBool(rng.random() < 0.5))
        add("uminus", num())
        add("to_float", num())
        add("coll", ej(2))
        add("distinct", arr_of(lambda: rng.choice([EInt(1), EInt(2), ENum(1.0)])))
        add("count", arr_of(scalar))
        add("sum", arr_of(lambda: EInt(rng.randint(-5, 5))))
        add("sum", arr_of(lambda: ENum(rng.randint(-8, 8) / 4.0)))
        add("min", arr_of(num, rng.randint(1, 4)))
        add("max", arr_of(num, rng.randint(1, 4)))
        add("min", arr_of(lambda: EStr(rng.choice(["a", "b", "ab"])), rng.randint(1, 3)))
        add("max", arr_of(lambda: EStr(rng.choice(["a", "b", "ab"])), rng.randint(1, 3)))
        add("min", EArr.of([EInt(1), EStr("a")]))
        add("flatten", arr_of(lambda: arr_of(scalar, rng.randint(0, 2))))
        add("left", ej(1))
        add("right", ej(1))
        add("first", arr_of(scalar, rng.randint(1, 3)))
        o = obj()
        if not o.fields:
            o = EObj((("a", scalar()),))
        add("dot", o, EStr(o.fields[0][0]))
        add("rec", EStr(rng.choice(["a", "b", "x.y"])), ej(1))
        add("project", obj(), EArr.of([EStr("a"), EStr("b")]))
        rows = EArr.of(
            EObj((("g1", rng.choice([EInt(1), EInt(2)])), ("v", scalar())))
            for _ in range(rng.randint(0, 4))
        )
        add("group_by", rows, EStr("$group"), EArr.of([EStr("g1")]))
        add("concat", obj(), obj())
        add("union", arr_of(scalar), arr_of(scalar))
        add("minus", arr_of(lambda: EInt(rng.randint(0, 2))), arr_of(lambda: EInt(rng.randint(0, 2))))
        add("inter", arr_of(lambda: EInt(rng.randint(0, 2))), arr_of(lambda: EInt(rng.randint(0, 2))))
        add("eq", ej(2), ej(2))
        x = scalar()
        add("eq", x, x)
        add("mem", EInt(1), arr_of(lambda: rng.choice([EInt(1), EInt(2), ENum(1.0)])))
        a, b = num(), num()
        for cmp in ("eq_sql", "neq_sql", "lt", "le", "gt", "ge"):
            add(cmp, a, b)
        add("lt", EStr("a"), EStr("b"))
        add("eq_sql", EInt(1), ENum(1.0))
        for arith in ("add", "sub", "mul"):
            add(arith, num(), num())
        add("add", EInt(2), EInt(3))
        add("div", EInt(rng.randint(-9, 9)), EInt(rng.choice([2, 3, -2])))
        add("div", ENum(1.0), ENum(4.0))
        add("div", EInt(7), EInt(0))
        add("strcat", EStr("ab"), EStr("cd"))
        add("either", boxed())
        lv = EObj((("$left", scalar()),))
        add("getLeft", lv)
        add("getRight", EObj((("$right", ENULL),)))
        add("push", arr_of(scalar), scalar())
        add("array", scalar(), scalar())
        add("array")
        add("iter", arr_of(scalar))
        add("toBool", EBool(rng.random() < 0.5))
        add("toBool", EInt(1))

    vectors = []
    for fn, args in cases:
        rec = {"fn": fn, "args": [enc(a) for a in args]}
        try:
            rec["result"] = enc(apply_fn(fn, args))
        except OpError:
            rec["error"] = True
        vectors.append(rec)
    return vectors


def main():
    out = pathlib.Path(__file__).parent / "vectors" / "runtime_vectors.json"
    out.parent.mkdir(exist_ok=True)
    vectors = build_vectors()
    counts = {}
    for v in vectors:
        counts[v["fn"]] = counts.get(v["fn"], 0) + 1
    assert all(n >= 5 for n in counts.values()), counts
    out.write_text(json.dumps({"vectors": vectors}, indent=1))
    print(f"wrote {out} ({len(vectors)} vectors, {len(counts)} functions)")


if __name__ == "__main__":
    main()
