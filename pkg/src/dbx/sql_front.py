"""SQL frontend: parsing, normalization, and lowering to the algebra.

The surface grammar covers the supported subset only; `distinct`,
`order by` and recursive queries are reported as unsupported features.
Normalization rewrites a statement into a canonical form where every
from-item carries a fresh alias (t0, t1, ... in source order), every
column reference is qualified, a missing where clause becomes
`where true`, and every select item has an explicit output name.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import sqlalg as A
from .data_model import DbxError, Schema, TableSchema

# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class SqlError(DbxError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


class SqlSyntaxError(SqlError):
    pass


class UnsupportedFeatureError(SqlError):
    pass


class ResolveError(SqlError):
    pass


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "create", "table", "select", "from", "where", "group", "by", "having",
    "union", "intersect", "except", "and", "or", "not", "exists", "in",
    "all", "any", "as", "true", "false", "null",
    "int", "integer", "text", "boolean", "bool", "double", "precision",
    "sum", "avg", "min", "max", "count",
    # recognized only to report them as unsupported
    "distinct", "order", "with", "limit", "recursive",
}

UNSUPPORTED_KEYWORDS = {"distinct", "order", "with", "limit", "recursive"}


@dataclass(frozen=True)
class Token:
    kind: str  # kw | ident | int | float | str | op | eof
    text: str
    value: object
    line: int
    col: int


class Lexer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.pos < len(self.src):
                if self.src[self.pos] == "\n":
                    self.line += 1
                    self.col = 1
                else:
                    self.col += 1
                self.pos += 1

    def _skip(self):
        while self.pos < len(self.src):
            c = self.src[self.pos]
            if c.isspace():
                self._advance()
            elif self.src.startswith("--", self.pos):
                while self.pos < len(self.src) and self.src[self.pos] != "\n":
                    self._advance()
            else:
                break

    def tokens(self) -> list[Token]:
        out = []
        while True:
            t = self._next()
            out.append(t)
            if t.kind == "eof":
                return out

    def _next(self) -> Token:
        self._skip()
        line, col = self.line, self.col
        if self.pos >= len(self.src):
            return Token("eof", "", None, line, col)
        c = self.src[self.pos]
        if c.isalpha() or c == "_":
            start = self.pos
            while self.pos < len(self.src) and (
                self.src[self.pos].isalnum() or self.src[self.pos] == "_"
            ):
                self._advance()
            word = self.src[start : self.pos]
            low = word.lower()
            if low in KEYWORDS:
                return Token("kw", low, None, line, col)
            return Token("ident", word, None, line, col)
        if c.isdigit():
            start = self.pos
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self._advance()
            is_float = False
            if self.pos < len(self.src) and self.src[self.pos] == ".":
                is_float = True
                self._advance()
                while self.pos < len(self.src) and self.src[self.pos].isdigit():
                    self._advance()
            if self.pos < len(self.src) and self.src[self.pos] in "eE":
                nxt = self.src[self.pos + 1 : self.pos + 3]
                if nxt[:1].isdigit() or (nxt[:1] in "+-" and nxt[1:2].isdigit()):
                    is_float = True
                    self._advance()
                    if self.src[self.pos] in "+-":
                        self._advance()
                    while self.pos < len(self.src) and self.src[self.pos].isdigit():
                        self._advance()
            text = self.src[start : self.pos]
            return Token(
                "float" if is_float else "int",
                text,
                float(text) if is_float else int(text),
                line,
                col,
            )
        if c == "'":
            self._advance()
            buf = []
            while True:
                if self.pos >= len(self.src):
                    raise SqlSyntaxError("unterminated string", line, col)
                ch = self.src[self.pos]
                self._advance()
                if ch == "'":
                    if self.pos < len(self.src) and self.src[self.pos] == "'":
                        buf.append("'")
                        self._advance()
                        continue
                    break
                buf.append(ch)
            return Token("str", "".join(buf), "".join(buf), line, col)
        for op in ("<>", "<=", ">=", "||", "(", ")", ",", ";", ".", "*", "/", "+", "-", "=", "<", ">"):
            if self.src.startswith(op, self.pos):
                self._advance(len(op))
                return Token("op", op, None, line, col)
        raise SqlSyntaxError(f"unexpected character {c!r}", line, col)


# ---------------------------------------------------------------------------
# Surface AST
# ---------------------------------------------------------------------------


@dataclass
class SConst:
    value: object
    line: int = 0
    col: int = 0


@dataclass
class SCol:
    parts: tuple[str, ...]
    line: int = 0
    col: int = 0


@dataclass
class SBin:
    op: str
    left: object
    right: object


@dataclass
class SNeg:
    arg: object


@dataclass
class SAgg:
    fn: str
    arg: object  # None for count(*)
    line: int = 0
    col: int = 0


@dataclass
class SCmp:
    op: str
    left: object
    right: object


@dataclass
class SAnd:
    left: object
    right: object


@dataclass
class SOr:
    left: object
    right: object


@dataclass
class SNot:
    arg: object


@dataclass
class SExists:
    query: object


@dataclass
class SIn:
    expr: object
    query: object
    negated: bool


@dataclass
class SQuant:
    op: str
    kind: str
    expr: object
    query: object


STAR = object()


@dataclass
class SItem:
    expr: object  # expression or STAR
    alias: Optional[str]
    line: int = 0
    col: int = 0


@dataclass
class SFrom:
    source: object  # str (table name) or select AST
    alias: Optional[str]
    line: int = 0
    col: int = 0


@dataclass
class SSelect:
    items: list
    froms: list
    where: object
    group_by: list
    having: object


@dataclass
class SSetOp:
    kind: str
    left: object
    right: object


@dataclass
class SCreateTable:
    name: str
    columns: list  # [(name, type)]
    line: int = 0
    col: int = 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class Parser:
    def __init__(self, text: str):
        self.toks = Lexer(text).tokens()
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at_kw(self, *words) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text in words

    def at_op(self, *ops) -> bool:
        t = self.peek()
        return t.kind == "op" and t.text in ops

    def eat_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "kw" or t.text != word:
            raise SqlSyntaxError(f"expected {word!r}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    def eat_op(self, op: str) -> Token:
        t = self.peek()
        if t.kind != "op" or t.text != op:
            raise SqlSyntaxError(f"expected {op!r}, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    # aggregate names are soft keywords: usable as column/alias names
    SOFT_KEYWORDS = ("sum", "avg", "min", "max", "count")

    def ident(self) -> Token:
        t = self.peek()
        if t.kind == "kw" and t.text in self.SOFT_KEYWORDS:
            return self.next()
        if t.kind != "ident":
            raise SqlSyntaxError(f"expected identifier, found {t.text or t.kind!r}", t.line, t.col)
        return self.next()

    def _check_unsupported(self):
        t = self.peek()
        if t.kind == "kw" and t.text in UNSUPPORTED_KEYWORDS:
            raise UnsupportedFeatureError(f"{t.text!r} is not supported", t.line, t.col)

    # -- statements --------------------------------------------------------

    def statements(self) -> list:
        out = []
        while self.peek().kind != "eof":
            self._check_unsupported()
            if self.at_kw("create"):
                out.append(self.create_table())
            else:
                out.append(self.select_stmt())
            if self.at_op(";"):
                self.next()
        return out

    def create_table(self) -> SCreateTable:
        t0 = self.eat_kw("create")
        self.eat_kw("table")
        name = self.ident().text
        self.eat_op("(")
        cols = []
        while True:
            col = self.ident().text
            cols.append((col, self.column_type()))
            if self.at_op(","):
                self.next()
                continue
            break
        self.eat_op(")")
        return SCreateTable(name, cols, t0.line, t0.col)

    def column_type(self) -> str:
        t = self.peek()
        if t.kind == "kw" and t.text in ("int", "integer"):
            self.next()
            return "int"
        if t.kind == "kw" and t.text == "text":
            self.next()
            return "text"
        if t.kind == "kw" and t.text in ("boolean", "bool"):
            self.next()
            return "boolean"
        if t.kind == "kw" and t.text == "double":
            self.next()
            self.eat_kw("precision")
            return "double precision"
        raise SqlSyntaxError(f"unknown column type {t.text!r}", t.line, t.col)

    # -- queries -----------------------------------------------------------

    def select_stmt(self):
        left = self.select_core()
        while self.at_kw("union", "intersect", "except"):
            kind = self.next().text
            self._check_unsupported()
            right = self.select_core()
            left = SSetOp(kind, left, right)
        return left

    def select_core(self):
        if self.at_op("("):
            self.next()
            inner = self.select_stmt()
            self.eat_op(")")
            return inner
        self.eat_kw("select")
        self._check_unsupported()
        items = [self.select_item()]
        while self.at_op(","):
            self.next()
            items.append(self.select_item())
        t = self.peek()
        if not self.at_kw("from"):
            raise SqlSyntaxError("a from clause is required", t.line, t.col)
        self.eat_kw("from")
        froms = [self.from_item()]
        while self.at_op(","):
            self.next()
            froms.append(self.from_item())
        where = None
        if self.at_kw("where"):
            self.next()
            where = self.expr()
        group_by = []
        if self.at_kw("group"):
            self.next()
            self.eat_kw("by")
            group_by.append(self.expr())
            while self.at_op(","):
                self.next()
                group_by.append(self.expr())
        having = None
        if self.at_kw("having"):
            self.next()
            having = self.expr()
        self._check_unsupported()
        return SSelect(items, froms, where, group_by, having)

    def select_item(self) -> SItem:
        t = self.peek()
        if self.at_op("*"):
            self.next()
            return SItem(STAR, None, t.line, t.col)
        e = self.expr()
        alias = None
        if self.at_kw("as"):
            self.next()
            alias = self.ident().text
        return SItem(e, alias, t.line, t.col)

    def from_item(self) -> SFrom:
        t = self.peek()
        if self.at_op("("):
            self.next()
            sub = self.select_stmt()
            self.eat_op(")")
            if self.at_kw("as"):
                self.next()
            if self.peek().kind != "ident":
                raise SqlSyntaxError("a subquery in from requires an alias", t.line, t.col)
            alias = self.ident().text
            return SFrom(sub, alias, t.line, t.col)
        name = self.ident().text
        alias = None
        if self.at_kw("as"):
            self.next()
            alias = self.ident().text
        elif self.peek().kind == "ident":
            alias = self.ident().text
        return SFrom(name, alias, t.line, t.col)

    # -- expressions --------------------------------------------------------

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at_kw("or"):
            self.next()
            left = SOr(left, self.and_expr())
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at_kw("and"):
            self.next()
            left = SAnd(left, self.not_expr())
        return left

    def not_expr(self):
        if self.at_kw("not"):
            self.next()
            return SNot(self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self):
        left = self.add_expr()
        if self.at_kw("not"):
            save = self.i
            self.next()
            if self.at_kw("in"):
                self.next()
                return SIn(left, self.subquery_in_parens(), True)
            self.i = save
            return left
        if self.at_kw("in"):
            self.next()
            return SIn(left, self.subquery_in_parens(), False)
        if self.at_op("=", "<>", "<", "<=", ">", ">="):
            op = self.next().text
            if self.at_kw("all", "any"):
                kind = self.next().text
                return SQuant(op, kind, left, self.subquery_in_parens())
            return SCmp(op, left, self.add_expr())
        return left

    def subquery_in_parens(self):
        self.eat_op("(")
        q = self.select_stmt()
        self.eat_op(")")
        return q

    def add_expr(self):
        left = self.mul_expr()
        while self.at_op("+", "-", "||"):
            op = self.next().text
            left = SBin(op, left, self.mul_expr())
        return left

    def mul_expr(self):
        left = self.unary_expr()
        while self.at_op("*", "/"):
            op = self.next().text
            left = SBin(op, left, self.unary_expr())
        return left

    def unary_expr(self):
        if self.at_op("-"):
            self.next()
            return SNeg(self.unary_expr())
        return self.primary()

    def primary(self):
        t = self.peek()
        if t.kind in ("int", "float", "str"):
            self.next()
            return SConst(t.value, t.line, t.col)
        if self.at_kw("true"):
            self.next()
            return SConst(True, t.line, t.col)
        if self.at_kw("false"):
            self.next()
            return SConst(False, t.line, t.col)
        if self.at_kw("null"):
            self.next()
            return SConst(None, t.line, t.col)
        if self.at_kw("exists"):
            self.next()
            return SExists(self.subquery_in_parens())
        if self.at_kw(*self.SOFT_KEYWORDS) and self.toks[self.i + 1].text == "(":
            fn = self.next().text
            self.eat_op("(")
            if fn == "count" and self.at_op("*"):
                self.next()
                self.eat_op(")")
                return SAgg("count", None, t.line, t.col)
            arg = self.expr()
            self.eat_op(")")
            return SAgg(fn, arg, t.line, t.col)
        if self.at_op("("):
            self.next()
            if self.at_kw("select"):
                raise UnsupportedFeatureError(
                    "scalar subqueries (singleton-bag coercion) are not supported",
                    t.line,
                    t.col,
                )
            e = self.expr()
            self.eat_op(")")
            return e
        if t.kind == "ident" or (t.kind == "kw" and t.text in self.SOFT_KEYWORDS):
            self.next()
            parts = [t.text]
            while self.at_op("."):
                self.next()
                parts.append(self.ident().text)
            return SCol(tuple(parts), t.line, t.col)
        self._check_unsupported()
        raise SqlSyntaxError(f"unexpected token {t.text or t.kind!r}", t.line, t.col)


def parse(text: str) -> list:
    """Parse a script: zero or more create-table statements and queries."""
    return Parser(text).statements()


# ---------------------------------------------------------------------------
# Canonical (normalized) AST
# ---------------------------------------------------------------------------


@dataclass
class NConst:
    value: object


@dataclass
class NCol:
    alias: str
    col: str

    @property
    def attr(self) -> str:
        return f"{self.alias}.{self.col}"


@dataclass
class NBin:
    op: str
    left: object
    right: object


@dataclass
class NNeg:
    arg: object


@dataclass
class NAgg:
    fn: str
    arg: object  # None for count(*)


@dataclass
class NTrue:
    pass


@dataclass
class NCmp:
    op: str
    left: object
    right: object


@dataclass
class NAnd:
    left: object
    right: object


@dataclass
class NOr:
    left: object
    right: object


@dataclass
class NNot:
    arg: object


@dataclass
class NExists:
    query: object


@dataclass
class NIn:
    items: list  # [(expr, name)] matching the subquery's output names
    query: object
    negated: bool


@dataclass
class NQuant:
    op: str
    kind: str
    expr: object
    query: object


@dataclass
class NFrom:
    alias: str
    source: object  # table name (str) or NSelect/NSetOp
    cols: list  # base column names exposed by this item


@dataclass
class NSelect:
    items: list  # [(expr, name)]
    froms: list
    where: object
    group_by: list  # [NCol]
    having: object

    @property
    def names(self):
        return [n for _, n in self.items]


@dataclass
class NSetOp:
    kind: str
    left: object
    right: object

    @property
    def names(self):
        return self.left.names


# ---------------------------------------------------------------------------
# Normalizer
# ---------------------------------------------------------------------------


@dataclass
class _Frame:
    user_alias: str
    fresh: str
    cols: list


class Normalizer:
    def __init__(self, schema: Schema):
        self.schema = schema
        self.counter = 0

    def fresh(self) -> str:
        alias = f"t{self.counter}"
        self.counter += 1
        return alias

    def normalize(self, stmt, scopes=None):
        scopes = scopes or []
        if isinstance(stmt, SSetOp):
            left = self.normalize(stmt.left, scopes)
            right = self.normalize(stmt.right, scopes)
            if len(left.names) != len(right.names):
                raise ResolveError(
                    f"set operation arity mismatch: {len(left.names)} vs {len(right.names)}"
                )
            right = self._rename_outputs(right, left.names)
            return NSetOp(stmt.kind, left, right)
        return self._normalize_select(stmt, scopes)

    def _rename_outputs(self, nq, names):
        if isinstance(nq, NSetOp):
            return NSetOp(nq.kind, self._rename_outputs(nq.left, names),
                          self._rename_outputs(nq.right, names))
        items = [(e, new) for (e, _), new in zip(nq.items, names)]
        return NSelect(items, nq.froms, nq.where, nq.group_by, nq.having)

    def _normalize_select(self, sel: SSelect, scopes) -> NSelect:
        frames = []
        for f in sel.froms:
            fresh = self.fresh()
            if isinstance(f.source, str):
                if f.source not in self.schema:
                    raise ResolveError(f"unknown table {f.source!r}", f.line, f.col)
                cols = [c for c, _ in self.schema[f.source].columns]
                user = f.alias or f.source
                frames.append((_Frame(user, fresh, cols), f.source))
            else:
                sub = self.normalize(f.source, scopes)
                user = f.alias
                frames.append((_Frame(user, fresh, list(sub.names)), sub))
        seen = {}
        for fr, _ in frames:
            if fr.user_alias in seen:
                raise ResolveError(f"duplicate table alias {fr.user_alias!r}")
            seen[fr.user_alias] = fr

    # the scope for this query level
        scope = [fr for fr, _ in frames]
        inner_scopes = [scope] + scopes

        top_level = not scopes

        nitems = []
        for item in sel.items:
            if item.expr is STAR:
                for fr in scope:
                    for c in fr.cols:
                        name = c if top_level else f"{fr.fresh}_{c}"
                        nitems.append((NCol(fr.fresh, c), name))
                continue
            e = self._expr(item.expr, inner_scopes, allow_agg=True, allow_sub=False)
            nitems.append((e, self._item_name(item, e, scope, top_level)))
        names = [n for _, n in nitems]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ResolveError(f"duplicate output name {dup!r}")

        where = NTrue() if sel.where is None else self._formula(
            sel.where, inner_scopes, allow_agg=False
        )
        group_by = []
        for g in sel.group_by:
            # grouping keys must come from this query's own from-items;
            # an outer column cannot key the grouping operator
            e = self._expr(g, [scope], allow_agg=False, allow_sub=False)
            if not isinstance(e, NCol):
                raise UnsupportedFeatureError(
                    "group by expressions must be column references"
                )
            group_by.append(e)
        having = None if sel.having is None else self._formula(
            sel.having, inner_scopes, allow_agg=True
        )

        nfroms = [NFrom(fr.fresh, src, list(fr.cols)) for fr, src in frames]
        return NSelect(nitems, nfroms, where, group_by, having)

    def _item_name(self, item: SItem, e, scope, top_level: bool) -> str:
        if item.alias:
            return item.alias
        if isinstance(e, NCol):
            return e.col if top_level else f"{e.alias}_{e.col}"
        if isinstance(e, NAgg):
            return e.fn if top_level else f"{scope[0].fresh}_{e.fn}"
        raise ResolveError(
            "select expression needs an explicit `as` name", item.line, item.col
        )

    def _resolve_col(self, ref: SCol, scopes) -> NCol:
        parts = ref.parts
        if len(parts) == 1:
            col = parts[0]
            for scope in scopes:
                hits = [fr for fr in scope if col in fr.cols]
                if len(hits) > 1:
                    raise ResolveError(f"ambiguous column {col!r}", ref.line, ref.col)
                if hits:
                    return NCol(hits[0].fresh, col)
            raise ResolveError(f"unknown column {col!r}", ref.line, ref.col)
        if len(parts) == 2:
            qual, col = parts
            for scope in scopes:
                hits = [fr for fr in scope if fr.user_alias == qual]
                if hits:
                    if col not in hits[0].cols:
                        raise ResolveError(
                            f"unknown column {col!r} in {qual!r}", ref.line, ref.col
                        )
                    return NCol(hits[0].fresh, col)
            raise ResolveError(f"unknown table alias {qual!r}", ref.line, ref.col)
        raise ResolveError(f"too many qualifiers in {'.'.join(parts)}", ref.line, ref.col)

    def _expr(self, e, scopes, allow_agg: bool, allow_sub: bool, in_agg: bool = False):
        if isinstance(e, SConst):
            return NConst(e.value)
        if isinstance(e, SCol):
            return self._resolve_col(e, scopes)
        if isinstance(e, SBin):
            return NBin(
                e.op,
                self._expr(e.left, scopes, allow_agg, allow_sub, in_agg),
                self._expr(e.right, scopes, allow_agg, allow_sub, in_agg),
            )
        if isinstance(e, SNeg):
            return NNeg(self._expr(e.arg, scopes, allow_agg, allow_sub, in_agg))
        if isinstance(e, SAgg):
            if in_agg:
                raise ResolveError("aggregates cannot be nested", e.line, e.col)
            if not allow_agg:
                raise ResolveError(
                    "aggregates are only allowed in select items and having",
                    e.line,
                    e.col,
                )
            arg = None
            if e.arg is not None:
                arg = self._expr(e.arg, scopes, allow_agg, False, in_agg=True)
            return NAgg(e.fn, arg)
        if isinstance(e, (SExists, SIn, SQuant, SAnd, SOr, SNot, SCmp)):
            raise ResolveError("conditions are not allowed in this context")
        raise SqlSyntaxError(f"unexpected expression {e!r}")

    def _formula(self, e, scopes, allow_agg: bool):
        if isinstance(e, SAnd):
            return NAnd(self._formula(e.left, scopes, allow_agg),
                        self._formula(e.right, scopes, allow_agg))
        if isinstance(e, SOr):
            return NOr(self._formula(e.left, scopes, allow_agg),
                       self._formula(e.right, scopes, allow_agg))
        if isinstance(e, SNot):
            return NNot(self._formula(e.arg, scopes, allow_agg))
        if isinstance(e, SCmp):
            return NCmp(
                e.op,
                self._expr(e.left, scopes, allow_agg, False),
                self._expr(e.right, scopes, allow_agg, False),
            )
        if isinstance(e, SExists):
            return NExists(self.normalize(e.query, scopes))
        if isinstance(e, SIn):
            sub = self.normalize(e.query, scopes)
            if len(sub.names) != 1:
                raise ResolveError("in-subquery must produce exactly one column")
            lhs = self._expr(e.expr, scopes, allow_agg, False)
            f = NIn([(lhs, sub.names[0])], sub, e.negated)
            return f
        if isinstance(e, SQuant):
            sub = self.normalize(e.query, scopes)
            if len(sub.names) != 1:
                raise ResolveError("all/any subquery must produce exactly one column")
            return NQuant(e.op, e.kind, self._expr(e.expr, scopes, allow_agg, False), sub)
        if isinstance(e, SConst) and e.value is True:
            return NTrue()
        # a bare (boolean) expression used as a condition
        return NCmp("=", self._expr(e, scopes, allow_agg, False), NConst(True))

def _has_agg(e) -> bool:
    if isinstance(e, NAgg):
        return True
    if isinstance(e, NBin):
        return _has_agg(e.left) or _has_agg(e.right)
    if isinstance(e, NNeg):
        return _has_agg(e.arg)
    return False


def _formula_has_agg(f) -> bool:
    if isinstance(f, (NAnd, NOr)):
        return _formula_has_agg(f.left) or _formula_has_agg(f.right)
    if isinstance(f, NNot):
        return _formula_has_agg(f.arg)
    if isinstance(f, NCmp):
        return _has_agg(f.left) or _has_agg(f.right)
    if isinstance(f, NQuant):
        return _has_agg(f.expr)
    if isinstance(f, NIn):
        return any(_has_agg(e) for e, _ in f.items)
    return False


def is_grouping(nsel: NSelect) -> bool:
    return bool(
        nsel.group_by
        or nsel.having is not None
        or any(_has_agg(e) for e, _ in nsel.items)
    )


# ---------------------------------------------------------------------------
# Canonical SQL printer (for the normalize-idempotence check)
# ---------------------------------------------------------------------------


def print_nexpr(e) -> str:
    if isinstance(e, NConst):
        v = e.value
        if v is None:
            return "null"
        if v is True:
            return "true"
        if v is False:
            return "false"
        if isinstance(v, str):
            return "'" + v.replace("'", "''") + "'"
        if isinstance(v, float):
            return repr(v)
        return str(v)
    if isinstance(e, NCol):
        return e.attr
    if isinstance(e, NBin):
        return f"({print_nexpr(e.left)} {e.op} {print_nexpr(e.right)})"
    if isinstance(e, NNeg):
        return f"(- {print_nexpr(e.arg)})"
    if isinstance(e, NAgg):
        if e.arg is None:
            return "count(*)"
        return f"{e.fn}({print_nexpr(e.arg)})"
    raise SqlSyntaxError(f"cannot print {e!r}")


def print_nformula(f) -> str:
    if isinstance(f, NTrue):
        return "true"
    if isinstance(f, NAnd):
        return f"({print_nformula(f.left)} and {print_nformula(f.right)})"
    if isinstance(f, NOr):
        return f"({print_nformula(f.left)} or {print_nformula(f.right)})"
    if isinstance(f, NNot):
        return f"(not {print_nformula(f.arg)})"
    if isinstance(f, NCmp):
        return f"{print_nexpr(f.left)} {f.op} {print_nexpr(f.right)}"
    if isinstance(f, NExists):
        return f"exists ({print_normalized(f.query)})"
    if isinstance(f, NIn):
        body = f"{print_nexpr(f.items[0][0])} in ({print_normalized(f.query)})"
        return f"(not {body})" if f.negated else body
    if isinstance(f, NQuant):
        return f"{print_nexpr(f.expr)} {f.op} {f.kind} ({print_normalized(f.query)})"
    raise SqlSyntaxError(f"cannot print {f!r}")


def print_normalized(nq) -> str:
    if isinstance(nq, NSetOp):
        return f"{print_normalized(nq.left)} {nq.kind} {print_normalized(nq.right)}"
    items = ", ".join(f"{print_nexpr(e)} as {n}" for e, n in nq.items)
    froms = ", ".join(
        f"{f.source} {f.alias}" if isinstance(f.source, str)
        else f"({print_normalized(f.source)}) {f.alias}"
        for f in nq.froms
    )
    out = f"select {items} from {froms} where {print_nformula(nq.where)}"
    if nq.group_by:
        out += " group by " + ", ".join(c.attr for c in nq.group_by)
    if nq.having is not None:
        out += " having " + print_nformula(nq.having)
    return out


# ---------------------------------------------------------------------------
# Lowering to the algebra
# ---------------------------------------------------------------------------


def expr_to_alg(e) -> A.Expr:
    if isinstance(e, NConst):
        return A.Const(e.value)
    if isinstance(e, NCol):
        return A.Attr(e.attr)
    if isinstance(e, NBin):
        return A.Fn(e.op, (expr_to_alg(e.left), expr_to_alg(e.right)))
    if isinstance(e, NNeg):
        return A.Fn("u-", (expr_to_alg(e.arg),))
    if isinstance(e, NAgg):
        if e.arg is None:
            return A.Agg("count_star", A.Const(1))
        return A.Agg(e.fn, expr_to_alg(e.arg))
    raise SqlSyntaxError(f"cannot lower {e!r}")


def formula_to_alg(f) -> A.Formula:
    if isinstance(f, NTrue):
        return A.FTrue()
    if isinstance(f, NAnd):
        return A.FAnd(formula_to_alg(f.left), formula_to_alg(f.right))
    if isinstance(f, NOr):
        return A.FOr(formula_to_alg(f.left), formula_to_alg(f.right))
    if isinstance(f, NNot):
        return A.FNot(formula_to_alg(f.arg))
    if isinstance(f, NCmp):
        return A.FPred(f.op, expr_to_alg(f.left), expr_to_alg(f.right))
    if isinstance(f, NExists):
        return A.FExists(to_sqlalg(f.query))
    if isinstance(f, NIn):
        inner = A.FIn(
            tuple((expr_to_alg(e), n) for e, n in f.items), to_sqlalg(f.query)
        )
        return A.FNot(inner) if f.negated else inner
    if isinstance(f, NQuant):
        return A.FQuant(f.op, f.kind, expr_to_alg(f.expr), to_sqlalg(f.query))
    raise SqlSyntaxError(f"cannot lower {f!r}")


def to_sqlalg(nq) -> A.Query:
    """Lower the canonical form: select-from-where becomes a projection
    over a selection over the join of renamed from-items; grouping
    queries become the grouping operator."""
    if isinstance(nq, NSetOp):
        return A.QSetOp(nq.kind, to_sqlalg(nq.left), to_sqlalg(nq.right))
    base = None
    for f in nq.froms:
        if isinstance(f.source, str):
            items = tuple(
                (A.Attr(f"{f.source}.{c}"), f"{f.alias}.{c}") for c in f.cols
            )
            wrapped: A.Query = A.QProject(items, A.QTable(f.source))
        else:
            items = tuple((A.Attr(c), f"{f.alias}.{c}") for c in f.cols)
            wrapped = A.QProject(items, to_sqlalg(f.source))
        base = wrapped if base is None else A.QJoin(base, wrapped)
    filtered = A.QSelect(formula_to_alg(nq.where), base)
    out_items = tuple((expr_to_alg(e), n) for e, n in nq.items)
    if is_grouping(nq):
        keys = tuple(A.Attr(c.attr) for c in nq.group_by)
        having = A.FTrue() if nq.having is None else formula_to_alg(nq.having)
        return A.QGamma(out_items, keys, having, filtered)
    return A.QProject(out_items, filtered)


# ---------------------------------------------------------------------------
# Script entry point
# ---------------------------------------------------------------------------


@dataclass
class CompiledScript:
    schema: Schema
    normalized: object  # NSelect | NSetOp
    algebra: A.Query
    sort: frozenset


def schema_of(stmts) -> Schema:
    tables = []
    for s in stmts:
        if isinstance(s, SCreateTable):
            tables.append(TableSchema(s.name, tuple(s.columns)))
    return Schema(tables)


def compile_script(text: str) -> CompiledScript:
    """Parse a DDL prelude plus exactly one query, normalize it, lower it
    to the algebra and run the well-formedness pass."""
    stmts = parse(text)
    queries = [s for s in stmts if not isinstance(s, SCreateTable)]
    if len(queries) != 1:
        raise SqlError(f"expected exactly one query, found {len(queries)}")
    schema = schema_of(stmts)
    norm = Normalizer(schema).normalize(queries[0])
    alg = to_sqlalg(norm)
    try:
        sort = A.wf_query(alg, (), schema)
    except A.WellFormednessError as exc:
        # reachable from legal syntax, e.g. projecting a non-key out of a
        # grouped query; report as a user error
        raise ResolveError(f"query is not well-formed: {exc}") from exc
    return CompiledScript(schema, norm, alg, sort)
