"""Value universes shared by every pipeline stage.

Three families live here:

* flat SQL values (``None`` | bool | int | float | str), rows and bags;
* nested data (atoms, records, bags, left/right tags, unit) used from
  the nested algebra down to Imp(Data);
* extended JSON (EJson) used by Imp(EJson) and the JavaScript target,
  which keeps big integers distinct from IEEE-754 numbers.

All values are immutable after construction; every function here is
pure, so values are safe to share across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable

COLUMN_TYPES = ("int", "text", "boolean", "double precision")

# Record labels reserved for the null/3VL encoding and internal plumbing.
RESERVED_LABELS = ("$left", "$right")


class DbxError(Exception):
    """Base class for user-facing errors."""


class ReservedLabelError(DbxError):
    """A user record used one of the reserved $left/$right labels."""


class SchemaError(DbxError):
    """Instance data does not conform to the declared schema."""


class InternalError(Exception):
    """A compiler invariant was violated; indicates a bug, not bad input."""


# ---------------------------------------------------------------------------
# SQL values
# ---------------------------------------------------------------------------

SqlValue = Any  # None | bool | int | float | str


def value_kind(v: SqlValue) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, int):
        return "integer"
    if isinstance(v, float):
        return "double"
    if isinstance(v, str):
        return "text"
    raise InternalError(f"not a SQL value: {v!r}")


def value_order_key(v: SqlValue) -> tuple:
    """Key realizing the total order on SQL values.

    null < booleans (false < true) < numerics < text.  Numerics compare
    numerically; exact ties between an integer and a double break with
    the integer first.
    """
    if v is None:
        return (0,)
    if isinstance(v, bool):
        return (1, v)
    if isinstance(v, int):
        return (2, v, 0)
    if isinstance(v, float):
        return (2, v, 1)
    if isinstance(v, str):
        return (3, v)
    raise InternalError(f"not a SQL value: {v!r}")


def value_compare(a: SqlValue, b: SqlValue) -> int:
    """Three-way comparison in the total order (-1, 0, 1)."""
    ka, kb = value_order_key(a), value_order_key(b)
    return -1 if ka < kb else (0 if ka == kb else 1)


def value_group_key(v: SqlValue) -> tuple:
    """Hashable key whose equality is equality in the total order.

    Used by grouping, distinct and set operations, where null compares
    equal to null and an integer is distinct from the equal double.
    """
    return value_order_key(v)


# ---------------------------------------------------------------------------
# Rows and bags
# ---------------------------------------------------------------------------


class Row:
    """A tuple: attribute names bound to SQL values, in canonical
    (lexicographic) attribute order so structural equality is semantic
    equality."""

    __slots__ = ("_items", "_index")

    def __init__(self, bindings: Iterable[tuple[str, SqlValue]]):
        items = tuple(sorted(bindings, key=lambda kv: kv[0]))
        names = [k for k, _ in items]
        if len(set(names)) != len(names):
            raise InternalError(f"duplicate attribute in row: {names}")
        self._items = items
        self._index = {k: v for k, v in items}

    @property
    def attrs(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self._items)

    def items(self) -> tuple[tuple[str, SqlValue], ...]:
        return self._items

    def __getitem__(self, name: str) -> SqlValue:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def key(self) -> tuple:
        return tuple((k, value_group_key(v)) for k, v in self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, Row) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v!r}" for k, v in self._items)
        return "(" + inner + ")"


class Bag:
    """A multiset of rows with a concrete iteration order.

    The order is observable only as the deterministic iteration order of
    every stage; bag equality ignores it.
    """

    __slots__ = ("rows", "sort")

    def __init__(self, rows: Iterable[Row], sort: frozenset[str]):
        self.rows = tuple(rows)
        self.sort = frozenset(sort)
        for r in self.rows:
            if frozenset(r.attrs) != self.sort:
                raise InternalError(
                    f"row sort {r.attrs} does not match bag sort {sorted(self.sort)}"
                )

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __repr__(self) -> str:
        return "{| " + ", ".join(repr(r) for r in self.rows) + " |}"


def bag_equal(b1: Bag, b2: Bag) -> bool:
    if b1.sort != b2.sort or len(b1) != len(b2):
        return False
    return sorted(r.key() for r in b1) == sorted(r.key() for r in b2)


# ---------------------------------------------------------------------------
# Schema and instance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[tuple[str, str], ...]  # ordered (column, type)

    def qualified(self) -> tuple[str, ...]:
        return tuple(f"{self.name}.{c}" for c, _ in self.columns)

    def column_type(self, col: str) -> str:
        for c, t in self.columns:
            if c == col:
                return t
        raise SchemaError(f"unknown column {col} in table {self.name}")


class Schema:
    """Named table schemas; column names are qualified `table.column`."""

    def __init__(self, tables: Iterable[TableSchema]):
        self.tables: dict[str, TableSchema] = {}
        for t in tables:
            if t.name in self.tables:
                raise SchemaError(f"duplicate table {t.name}")
            self.tables[t.name] = t

    def __contains__(self, name: str) -> bool:
        return name in self.tables

    def __getitem__(self, name: str) -> TableSchema:
        return self.tables[name]

    def to_sidecar(self) -> dict:
        return {
            t.name: {c: ty for c, ty in t.columns} for t in self.tables.values()
        }


def _check_column_value(v, ty: str, where: str):
    if v is None:
        return None
    if ty == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            # Accept JSON "34.0" for an int column only when exact.
            if isinstance(v, float) and v.is_integer():
                return int(v)
            raise SchemaError(f"{where}: expected int, got {v!r}")
        return v
    if ty == "double precision":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{where}: expected double, got {v!r}")
        return float(v)
    if ty == "text":
        if not isinstance(v, str):
            raise SchemaError(f"{where}: expected text, got {v!r}")
        return v
    if ty == "boolean":
        if not isinstance(v, bool):
            raise SchemaError(f"{where}: expected boolean, got {v!r}")
        return v
    raise SchemaError(f"{where}: unknown column type {ty}")


class Instance:
    """Database contents: table name -> bag, constant during evaluation."""

    def __init__(self, schema: Schema, tables: dict[str, Bag]):
        self.schema = schema
        self.tables = tables

    @staticmethod
    def from_json(schema: Schema, obj: dict) -> "Instance":
        """Build an instance from the JSON wire format: an object mapping
        table names to arrays of flat objects with unqualified keys."""
        if not isinstance(obj, dict):
            raise SchemaError("instance must be a JSON object")
        tables: dict[str, Bag] = {}
        for name, ts in schema.tables.items():
            rows_json = obj.get(name, [])
            if not isinstance(rows_json, list):
                raise SchemaError(f"table {name} must be an array")
            rows = []
            for i, rec in enumerate(rows_json):
                if not isinstance(rec, dict):
                    raise SchemaError(f"{name}[{i}] must be an object")
                for k in rec:
                    if k in RESERVED_LABELS:
                        raise ReservedLabelError(
                            f"{name}[{i}]: reserved label {k!r} not allowed"
                        )
                bindings = []
                for col, ty in ts.columns:
                    v = _check_column_value(rec.get(col), ty, f"{name}[{i}].{col}")
                    bindings.append((f"{name}.{col}", v))
                extra = set(rec) - {c for c, _ in ts.columns}
                if extra:
                    raise SchemaError(f"{name}[{i}]: unknown columns {sorted(extra)}")
                rows.append(Row(bindings))
            tables[name] = Bag(rows, frozenset(ts.qualified()))
        unknown = set(obj) - set(schema.tables)
        if unknown:
            raise SchemaError(f"instance has unknown tables {sorted(unknown)}")
        return Instance(schema, tables)

    def table(self, name: str) -> Bag:
        try:
            return self.tables[name]
        except KeyError:
            raise SchemaError(f"unknown table {name}") from None


# ---------------------------------------------------------------------------
# Nested data (the algebra-to-Imp(Data) data model)
# ---------------------------------------------------------------------------


def atom_key(v) -> tuple:
    if isinstance(v, bool):
        return ("b", v)
    if isinstance(v, int):
        return ("i", v)
    if isinstance(v, float):
        return ("f", v)
    if isinstance(v, str):
        return ("s", v)
    raise InternalError(f"not an atom payload: {v!r}")


class NraData:
    __slots__ = ()


class Atom(NraData):
    """A scalar constant: bool, integer, double or text (never null)."""

    __slots__ = ("value",)

    def __init__(self, value):
        if value is None:
            raise InternalError("null is encoded as right(unit), not an atom")
        self.value = value

    def __eq__(self, other):
        return isinstance(other, Atom) and atom_key(self.value) == atom_key(other.value)

    def __hash__(self):
        return hash(("atom",) + atom_key(self.value))

    def __repr__(self):
        return f"Atom({self.value!r})"


class Rec(NraData):
    """A record; labels are pairwise distinct and kept sorted."""

    __slots__ = ("fields", "_index")

    def __init__(self, fields: Iterable[tuple[str, NraData]]):
        items = tuple(sorted(fields, key=lambda kv: kv[0]))
        labels = [k for k, _ in items]
        if len(set(labels)) != len(labels):
            raise InternalError(f"duplicate record label: {labels}")
        self.fields = items
        self._index = {k: v for k, v in items}

    def get(self, label: str):
        return self._index.get(label)

    def __contains__(self, label):
        return label in self._index

    def labels(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.fields)

    def __eq__(self, other):
        return isinstance(other, Rec) and self.fields == other.fields

    def __hash__(self):
        return hash(("rec", self.fields))

    def __repr__(self):
        return "{" + ", ".join(f"{k}: {v!r}" for k, v in self.fields) + "}"


class Coll(NraData):
    """A bag of nested data; the sequence order is the iteration order."""

    __slots__ = ("items",)

    def __init__(self, items: Iterable[NraData]):
        self.items = tuple(items)

    def __eq__(self, other):
        return isinstance(other, Coll) and self.items == other.items

    def __hash__(self):
        return hash(("coll", self.items))

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        return "[" + ", ".join(repr(x) for x in self.items) + "]"


class Left(NraData):
    __slots__ = ("data",)

    def __init__(self, data: NraData):
        self.data = data

    def __eq__(self, other):
        return isinstance(other, Left) and self.data == other.data

    def __hash__(self):
        return hash(("left", self.data))

    def __repr__(self):
        return f"Left({self.data!r})"


class Right(NraData):
    __slots__ = ("data",)

    def __init__(self, data: NraData):
        self.data = data

    def __eq__(self, other):
        return isinstance(other, Right) and self.data == other.data

    def __hash__(self):
        return hash(("right", self.data))

    def __repr__(self):
        return f"Right({self.data!r})"


class _Unit(NraData):
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, _Unit)

    def __hash__(self):
        return hash("unit")

    def __repr__(self):
        return "Unit"


UNIT = _Unit()

EMPTY_COLL = Coll(())

TRUE3 = Left(Atom(True))
FALSE3 = Left(Atom(False))
UNKNOWN3 = Right(UNIT)


def data_sort_key(d: NraData) -> tuple:
    """Recursive key for a total order on nested data (canonical sorting
    of bags in multiset comparisons)."""
    if isinstance(d, _Unit):
        return (0,)
    if isinstance(d, Atom):
        return (1, value_order_key(d.value) + (atom_key(d.value)[0],))
    if isinstance(d, Left):
        return (2, data_sort_key(d.data))
    if isinstance(d, Right):
        return (3, data_sort_key(d.data))
    if isinstance(d, Rec):
        return (4, tuple((k, data_sort_key(v)) for k, v in d.fields))
    if isinstance(d, Coll):
        return (5, tuple(data_sort_key(x) for x in d.items))
    raise InternalError(f"not nested data: {d!r}")


def data_bag_equal(d1: NraData, d2: NraData) -> bool:
    if not isinstance(d1, Coll) or not isinstance(d2, Coll):
        return d1 == d2
    if len(d1.items) != len(d2.items):
        return False
    return sorted(map(data_sort_key, d1.items)) == sorted(map(data_sort_key, d2.items))


def canon_coll(d: Coll) -> Coll:
    return Coll(sorted(d.items, key=data_sort_key))


# ---------------------------------------------------------------------------
# SQL values -> nested data
# ---------------------------------------------------------------------------


def value_to_data(v: SqlValue) -> NraData:
    """Box a possibly-null value: left(atom v) when present, right(unit)
    when null."""
    if v is None:
        return Right(UNIT)
    return Left(Atom(v))


def data_to_value(d: NraData) -> SqlValue:
    if isinstance(d, Right) and d.data == UNIT:
        return None
    if isinstance(d, Left) and isinstance(d.data, Atom):
        return d.data.value
    raise InternalError(f"not a boxed value: {d!r}")


def row_to_data(r: Row) -> Rec:
    return Rec((a, value_to_data(v)) for a, v in r.items())


def bag_to_data(b: Bag) -> Coll:
    """Encode a bag of rows pointwise, preserving order; attribute names
    map to record labels unchanged."""
    return Coll(row_to_data(r) for r in b)


def instance_to_data(inst: Instance) -> Rec:
    return Rec((name, bag_to_data(bag)) for name, bag in inst.tables.items())


# ---------------------------------------------------------------------------
# EJson
# ---------------------------------------------------------------------------


class EJson:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class EStr(EJson):
    value: str


class ENum(EJson):
    """An IEEE-754 binary64 number.  Distinct from EInt even when
    numerically equal."""

    __slots__ = ("value",)

    def __init__(self, value: float):
        object.__setattr__(self, "value", float(value))

    def __eq__(self, other):
        return isinstance(other, ENum) and (
            self.value == other.value
            or (math.isnan(self.value) and math.isnan(other.value))
        )

    def __hash__(self):
        return hash(("enum", self.value))

    def __repr__(self):
        return f"ENum({self.value!r})"


@dataclass(frozen=True, slots=True)
class EInt(EJson):
    """An exact big integer."""

    value: int


@dataclass(frozen=True, slots=True)
class EBool(EJson):
    value: bool


class _ENull(EJson):
    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, _ENull)

    def __hash__(self):
        return hash("enull")

    def __repr__(self):
        return "ENull"


ENULL = _ENull()


class EObj(EJson):
    __slots__ = ("fields", "_index")

    def __init__(self, fields: Iterable[tuple[str, EJson]]):
        items = tuple(sorted(fields, key=lambda kv: kv[0]))
        keys = [k for k, _ in items]
        if len(set(keys)) != len(keys):
            raise InternalError(f"duplicate object key: {keys}")
        self.fields = items
        self._index = {k: v for k, v in items}

    def get(self, key: str):
        return self._index.get(key)

    def __contains__(self, key):
        return key in self._index

    def __eq__(self, other):
        return isinstance(other, EObj) and self.fields == other.fields

    def __hash__(self):
        return hash(("eobj", self.fields))

    def __repr__(self):
        return "EObj{" + ", ".join(f"{k}: {v!r}" for k, v in self.fields) + "}"


class EArr(EJson):
    """A persistent array: a view of `length` elements over a shared
    backing list.  push() is amortized O(1) for linear use; older views
    never observe the new element."""

    __slots__ = ("_backing", "length")

    def __init__(self, backing: list | None = None, length: int | None = None):
        self._backing = backing if backing is not None else []
        self.length = len(self._backing) if length is None else length

    @staticmethod
    def of(items: Iterable[EJson]) -> "EArr":
        backing = list(items)
        return EArr(backing, len(backing))

    def push(self, v: EJson) -> "EArr":
        if len(self._backing) == self.length:
            self._backing.append(v)
            return EArr(self._backing, self.length + 1)
        fresh = self._backing[: self.length]
        fresh.append(v)
        return EArr(fresh, self.length + 1)

    def items(self) -> list:
        return self._backing[: self.length]

    def __iter__(self):
        for i in range(self.length):
            yield self._backing[i]

    def __len__(self):
        return self.length

    def __eq__(self, other):
        return (
            isinstance(other, EArr)
            and self.length == other.length
            and self._backing[: self.length] == other._backing[: other.length]
        )

    def __hash__(self):
        return hash(("earr", tuple(self.items())))

    def __repr__(self):
        return "EArr" + repr(self.items())


def ejson_sort_key(e: EJson) -> tuple:
    if isinstance(e, _ENull):
        return (0,)
    if isinstance(e, EBool):
        return (1, e.value)
    if isinstance(e, EInt):
        return (2, e.value, 0)
    if isinstance(e, ENum):
        return (2, e.value, 1)
    if isinstance(e, EStr):
        return (3, e.value)
    if isinstance(e, EObj):
        return (4, tuple((k, ejson_sort_key(v)) for k, v in e.fields))
    if isinstance(e, EArr):
        return (5, tuple(ejson_sort_key(x) for x in e))
    raise InternalError(f"not ejson: {e!r}")


def ejson_bag_equal(e1: EJson, e2: EJson) -> bool:
    if not isinstance(e1, EArr) or not isinstance(e2, EArr):
        return e1 == e2
    if len(e1) != len(e2):
        return False
    return sorted(map(ejson_sort_key, e1)) == sorted(map(ejson_sort_key, e2))


# ---------------------------------------------------------------------------
# Nested data <-> EJson
# ---------------------------------------------------------------------------


def data_to_ejson(d: NraData) -> EJson:
    """Injective encoding of nested data into EJson.

    left/right become objects with the reserved labels $left/$right;
    unit becomes JSON null; integer atoms become big integers.  User
    records carrying a reserved label are rejected to keep the encoding
    injective.
    """
    if isinstance(d, _Unit):
        return ENULL
    if isinstance(d, Atom):
        v = d.value
        if isinstance(v, bool):
            return EBool(v)
        if isinstance(v, int):
            return EInt(v)
        if isinstance(v, float):
            return ENum(v)
        return EStr(v)
    if isinstance(d, Left):
        return EObj((("$left", data_to_ejson(d.data)),))
    if isinstance(d, Right):
        return EObj((("$right", data_to_ejson(d.data)),))
    if isinstance(d, Rec):
        for k, _ in d.fields:
            if k in RESERVED_LABELS:
                raise ReservedLabelError(f"record label {k!r} is reserved")
        return EObj((k, data_to_ejson(v)) for k, v in d.fields)
    if isinstance(d, Coll):
        return EArr.of(data_to_ejson(x) for x in d.items)
    raise InternalError(f"not nested data: {d!r}")


def ejson_to_data(e: EJson) -> NraData:
    """Inverse of data_to_ejson on its image."""
    if isinstance(e, _ENull):
        return UNIT
    if isinstance(e, EBool):
        return Atom(e.value)
    if isinstance(e, EInt):
        return Atom(e.value)
    if isinstance(e, ENum):
        return Atom(e.value)
    if isinstance(e, EStr):
        return Atom(e.value)
    if isinstance(e, EObj):
        keys = [k for k, _ in e.fields]
        if keys == ["$left"]:
            return Left(ejson_to_data(e.fields[0][1]))
        if keys == ["$right"]:
            return Right(ejson_to_data(e.fields[0][1]))
        for k in keys:
            if k in RESERVED_LABELS:
                raise ReservedLabelError(f"mixed reserved label {k!r}")
        return Rec((k, ejson_to_data(v)) for k, v in e.fields)
    if isinstance(e, EArr):
        return Coll(ejson_to_data(x) for x in e)
    raise InternalError(f"not ejson: {e!r}")


# ---------------------------------------------------------------------------
# EJson <-> JSON text
# ---------------------------------------------------------------------------


def format_number(x: float) -> str:
    """Format a binary64 the way JavaScript does for the common cases:
    integral values print without a fractional part."""
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if math.isnan(x):
        return "NaN"
    if x == int(x) and abs(x) < 1e21:
        return str(int(x))
    return repr(x)


def ejson_to_text(e: EJson) -> str:
    """Serialize to JSON text; big integers print as bare integer
    literals, object keys stay in canonical order."""
    if isinstance(e, _ENull):
        return "null"
    if isinstance(e, EBool):
        return "true" if e.value else "false"
    if isinstance(e, EInt):
        return str(e.value)
    if isinstance(e, ENum):
        return format_number(e.value)
    if isinstance(e, EStr):
        return json.dumps(e.value)
    if isinstance(e, EObj):
        return "{" + ",".join(f"{json.dumps(k)}:{ejson_to_text(v)}" for k, v in e.fields) + "}"
    if isinstance(e, EArr):
        return "[" + ",".join(ejson_to_text(x) for x in e) + "]"
    raise InternalError(f"not ejson: {e!r}")


def ejson_from_json(obj, int_as_bigint: bool = False) -> EJson:
    """Lift parsed JSON into EJson.  Without schema knowledge an integer
    literal stays a number unless ``int_as_bigint`` is set."""
    if obj is None:
        return ENULL
    if isinstance(obj, bool):
        return EBool(obj)
    if isinstance(obj, int):
        return EInt(obj) if int_as_bigint else ENum(float(obj))
    if isinstance(obj, float):
        return ENum(obj)
    if isinstance(obj, str):
        return EStr(obj)
    if isinstance(obj, list):
        return EArr.of(ejson_from_json(x, int_as_bigint) for x in obj)
    if isinstance(obj, dict):
        return EObj((k, ejson_from_json(v, int_as_bigint)) for k, v in obj.items())
    raise DbxError(f"not JSON data: {obj!r}")
