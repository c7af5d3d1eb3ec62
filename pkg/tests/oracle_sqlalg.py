"""Naive nested-loop evaluator used as an independent oracle.

Deliberately shares no evaluation helpers with dbx.sqlalg: its own
three-valued logic, its own grouping, its own aggregate folds, working
on plain dicts and lists.  Only the AST node types and the Instance
container are shared, since those are the data under test.
"""

from dbx import sqlalg as A

TRUE, FALSE, UNK = "t", "f", "u"


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _vkey(v):
    if v is None:
        return ("null",)
    if isinstance(v, bool):
        return ("bool", v)
    if isinstance(v, int):
        return ("num", v, "i")
    if isinstance(v, float):
        return ("num", v, "f")
    return ("str", v)


def _rowkey(row):
    return tuple(sorted((k, _vkey(v)) for k, v in row.items()))


def n_not(a):
    return {TRUE: FALSE, FALSE: TRUE, UNK: UNK}[a]


def n_and(a, b):
    if a == FALSE or b == FALSE:
        return FALSE
    if a == TRUE and b == TRUE:
        return TRUE
    return UNK


def n_or(a, b):
    if a == TRUE or b == TRUE:
        return TRUE
    if a == FALSE and b == FALSE:
        return FALSE
    return UNK


def n_cmp(op, a, b):
    if a is None or b is None:
        return UNK
    res = {
        "=": a == b,
        "<>": a != b,
        "<": a < b,
        "<=": a <= b,
        ">": a > b,
        ">=": a >= b,
    }[op]
    return TRUE if res else FALSE


# environments are lists of dicts {"attrs", "groups", "rows"} (top first)


def find_env(env, e):
    if isinstance(e, A.Const):
        return env
    if not env:
        return None
    deeper = find_env(env[1:], e)
    if deeper is not None:
        return deeper
    usable = set()
    for s in env[1:]:
        usable.update(s["groups"])
    allowed = {A.Attr(a) for a in env[0]["attrs"]} | set(usable)

    def built(x):
        if isinstance(x, A.Const):
            return True
        if x in allowed:
            return True
        if isinstance(x, A.Fn):
            return all(built(y) for y in x.args)
        return False

    return env if built(e) else None


def o_expr(e, env):
    if isinstance(e, A.Const):
        return e.value
    if isinstance(e, A.Attr):
        for s in env:
            if e.name in s["attrs"]:
                return s["rows"][0][e.name]
        raise AssertionError(f"unresolved {e.name}")
    if isinstance(e, A.Fn):
        args = [o_expr(a, env) for a in e.args]
        if any(a is None for a in args):
            return None
        if e.op == "u-":
            return -args[0]
        if e.op == "||":
            return args[0] + args[1]
        a, b = args
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0:
                return None
            if isinstance(a, int) and isinstance(b, int):
                q = abs(a) // abs(b)
                return q if (a >= 0) == (b >= 0) else -q
            return a / b
        raise AssertionError(e.op)
    if isinstance(e, A.Agg):
        suffix = find_env(env, e.arg)
        top = suffix[0]
        vals = []
        for t in top["rows"]:
            one = [{"attrs": top["attrs"], "groups": top["groups"], "rows": [t]}]
            vals.append(o_expr(e.arg, one + list(suffix[1:])))
        if e.fn == "count_star":
            return len(vals)
        vals = [v for v in vals if v is not None]
        if e.fn == "count":
            return len(vals)
        if not vals:
            return None
        if e.fn == "sum":
            out = vals[0]
            for v in vals[1:]:
                out = out + v
            return out
        if e.fn == "avg":
            out = vals[0]
            for v in vals[1:]:
                out = out + v
            return float(out) / len(vals)
        if e.fn == "min":
            return min(vals, key=_vkey)
        if e.fn == "max":
            return max(vals, key=_vkey)
        raise AssertionError(e.fn)
    raise AssertionError(e)


def o_formula(f, env, inst):
    if isinstance(f, A.FTrue):
        return TRUE
    if isinstance(f, A.FAnd):
        return n_and(o_formula(f.left, env, inst), o_formula(f.right, env, inst))
    if isinstance(f, A.FOr):
        return n_or(o_formula(f.left, env, inst), o_formula(f.right, env, inst))
    if isinstance(f, A.FNot):
        return n_not(o_formula(f.arg, env, inst))
    if isinstance(f, A.FPred):
        return n_cmp(f.op, o_expr(f.left, env), o_expr(f.right, env))
    if isinstance(f, A.FQuant):
        v = o_expr(f.expr, env)
        rows = o_query(f.query, env, inst)
        results = [n_cmp(f.op, v, list(r.values())[0]) for r in rows]
        if f.kind == "all":
            if FALSE in results:
                return FALSE
            if UNK in results:
                return UNK
            return TRUE
        if TRUE in results:
            return TRUE
        if UNK in results:
            return UNK
        return FALSE
    if isinstance(f, A.FIn):
        vals = [(name, o_expr(e, env)) for e, name in f.items]
        rows = o_query(f.query, env, inst)
        out = FALSE
        for r in rows:
            m = TRUE
            for name, v in vals:
                m = n_and(m, n_cmp("=", v, r[name]))
            out = n_or(out, m)
        return out
    if isinstance(f, A.FExists):
        return TRUE if o_query(f.query, env, inst) else FALSE
    raise AssertionError(f)


def o_query(q, env, inst):
    """Evaluate to a list of plain dicts."""
    if isinstance(q, A.QEmpty):
        return []
    if isinstance(q, A.QTable):
        return [dict(r.items()) for r in inst.table(q.name)]
    if isinstance(q, A.QSetOp):
        left = o_query(q.left, env, inst)
        right = o_query(q.right, env, inst)
        if q.kind == "union":
            return left + right
        rkeys = [_rowkey(r) for r in right]
        out = []
        if q.kind == "intersect":
            for r in left:
                k = _rowkey(r)
                if k in rkeys:
                    rkeys.remove(k)
                    out.append(r)
            return out
        for r in left:
            k = _rowkey(r)
            if k in rkeys:
                rkeys.remove(k)
            else:
                out.append(r)
        return out
    if isinstance(q, A.QJoin):
        out = []
        for r1 in o_query(q.left, env, inst):
            for r2 in o_query(q.right, env, inst):
                shared = set(r1) & set(r2)
                if all(_vkey(r1[a]) == _vkey(r2[a]) for a in shared):
                    merged = dict(r1)
                    merged.update(r2)
                    out.append(merged)
        return out
    if isinstance(q, A.QProject):
        out = []
        for r in o_query(q.query, env, inst):
            s = [{"attrs": set(r), "groups": (), "rows": [r]}] + list(env)
            out.append({name: o_expr(e, s) for e, name in q.items})
        return out
    if isinstance(q, A.QSelect):
        out = []
        for r in o_query(q.query, env, inst):
            s = [{"attrs": set(r), "groups": (), "rows": [r]}] + list(env)
            if o_formula(q.formula, s, inst) == TRUE:
                out.append(r)
        return out
    if isinstance(q, A.QGamma):
        rows = o_query(q.query, env, inst)
        attrs = set(rows[0]) if rows else set()
        buckets = []
        for r in rows:
            s = [{"attrs": set(r), "groups": (), "rows": [r]}] + list(env)
            key = tuple(_vkey(o_expr(k, s)) for k in q.keys)
            for bk, members in buckets:
                if bk == key:
                    members.append(r)
                    break
            else:
                buckets.append((key, [r]))
        out = []
        for _, members in buckets:
            s = [{"attrs": attrs, "groups": tuple(q.keys), "rows": members}] + list(env)
            if o_formula(q.having, s, inst) != TRUE:
                continue
            out.append({name: o_expr(e, s) for e, name in q.items})
        return out
    raise AssertionError(q)


def rows_multiset(rows):
    return sorted(_rowkey(r) for r in rows)


def bag_matches(bag, rows) -> bool:
    """Compare an interpreter Bag with the oracle's list of dicts."""
    got = sorted(r.key() for r in bag)
    want = sorted(
        tuple(sorted((k, _vkey(v)) for k, v in r.items())) for r in rows
    )
    # value_group_key and _vkey differ in shape; normalize through repr-free
    # canonical forms by re-deriving the oracle key with the same scheme.
    def norm_val(vk):
        kind = vk[0]
        if kind == "null":
            return (0,)
        if kind == "bool":
            return (1, vk[1])
        if kind == "num":
            return (2, vk[1], 0 if vk[2] == "i" else 1)
        return (3, vk[1])

    want_n = [tuple((k, norm_val(v)) for k, v in r) for r in want]
    return got == sorted(want_n)
