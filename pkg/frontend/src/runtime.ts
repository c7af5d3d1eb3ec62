/**
 * Runtime library linked with compiled queries.
 *
 * Values are extended JSON: null, booleans, IEEE-754 numbers, bigints,
 * strings, plain objects, and persistent arrays.  Every operator the
 * emitted code can call lives here; native JS operators are never used
 * on query data directly, so bigints and numbers cannot mix silently.
 *
 * This module must stay dependency-free: the runner copies its compiled
 * form next to each query as dbx_runtime.cjs.
 */

export type EJson =
  | null
  | boolean
  | number
  | bigint
  | string
  | PersistentArray
  | { [key: string]: EJson };

/**
 * A persistent array: a view of $length elements over a shared backing
 * store.  push() copies the backing data (slice) only when the backing
 * length differs from the view's $length, so linear use is amortized
 * O(1) and older views never observe new elements.
 */
export class PersistentArray {
  $content: EJson[];
  $length: number;

  constructor(content: EJson[], length?: number) {
    this.$content = content;
    this.$length = length === undefined ? content.length : length;
  }

  push(v: EJson): PersistentArray {
    if (this.$content.length === this.$length) {
      this.$content.push(v);
      return new PersistentArray(this.$content, this.$length + 1);
    }
    const copy = this.$content.slice(0, this.$length);
    copy.push(v);
    return new PersistentArray(copy, this.$length + 1);
  }

  items(): EJson[] {
    return this.$content.slice(0, this.$length);
  }
}

export function array(...items: EJson[]): PersistentArray {
  return new PersistentArray(items.slice());
}

export function iter(a: EJson): EJson[] {
  return asArray(a).items();
}

function fail(msg: string): never {
  throw new TypeError(msg);
}

/**
 * Structural test for persistent arrays.  The runner and a compiled
 * query may each load their own copy of this module, so identity via
 * instanceof is not reliable; the $content/$length shape is.
 */
export function isArr(v: EJson): v is PersistentArray {
  return (
    typeof v === "object" &&
    v !== null &&
    Array.isArray((v as { $content?: unknown }).$content) &&
    typeof (v as { $length?: unknown }).$length === "number"
  );
}

function isObject(v: EJson): v is { [key: string]: EJson } {
  return typeof v === "object" && v !== null && !isArr(v);
}

function asArray(v: EJson): PersistentArray {
  if (v instanceof PersistentArray) return v;
  if (isArr(v)) {
    return new PersistentArray(v.$content, v.$length);
  }
  return fail(`expected an array, got ${describe(v)}`);
}

function asObject(v: EJson): { [key: string]: EJson } {
  if (isObject(v)) return v;
  return fail(`expected an object, got ${describe(v)}`);
}

function describe(v: EJson): string {
  if (v === null) return "null";
  if (v instanceof PersistentArray) return "array";
  return typeof v;
}

// ---------------------------------------------------------------------------
// Canonical ordering (mirrors the compiler's ejson ordering exactly)
// ---------------------------------------------------------------------------

function rank(v: EJson): number {
  if (v === null) return 0;
  if (typeof v === "boolean") return 1;
  if (typeof v === "number" || typeof v === "bigint") return 2;
  if (typeof v === "string") return 3;
  if (isObject(v)) return 4;
  return 5; // array
}

function cmpNum(a: number | bigint, b: number | bigint): number {
  if (typeof a === "bigint" && typeof b === "bigint") {
    return a < b ? -1 : a > b ? 1 : 0;
  }
  const x = Number(a);
  const y = Number(b);
  if (x < y) return -1;
  if (x > y) return 1;
  // equal numeric value: the bigint variant sorts first
  const va = typeof a === "bigint" ? 0 : 1;
  const vb = typeof b === "bigint" ? 0 : 1;
  return va - vb;
}

export function compare(a: EJson, b: EJson): number {
  const ra = rank(a);
  const rb = rank(b);
  if (ra !== rb) return ra < rb ? -1 : 1;
  switch (ra) {
    case 0:
      return 0;
    case 1: {
      const x = a as boolean, y = b as boolean;
      return x === y ? 0 : x ? 1 : -1;
    }
    case 2:
      return cmpNum(a as number | bigint, b as number | bigint);
    case 3: {
      const x = a as string, y = b as string;
      return x < y ? -1 : x > y ? 1 : 0;
    }
    case 4: {
      const oa = a as { [key: string]: EJson };
      const ob = b as { [key: string]: EJson };
      const ka = Object.keys(oa).sort();
      const kb = Object.keys(ob).sort();
      for (let i = 0; i < Math.min(ka.length, kb.length); i++) {
        if (ka[i] !== kb[i]) return ka[i] < kb[i] ? -1 : 1;
        const c = compare(oa[ka[i]], ob[kb[i]]);
        if (c !== 0) return c;
      }
      return ka.length - kb.length;
    }
    default: {
      const xa = (a as PersistentArray).items();
      const xb = (b as PersistentArray).items();
      for (let i = 0; i < Math.min(xa.length, xb.length); i++) {
        const c = compare(xa[i], xb[i]);
        if (c !== 0) return c;
      }
      return xa.length - xb.length;
    }
  }
}

export function equal(a: EJson, b: EJson): boolean {
  return compare(a, b) === 0;
}

/** Canonical key string; used for hashing in grouping and bag ops. */
export function canonicalKey(v: EJson): string {
  if (v === null) return "z";
  if (typeof v === "boolean") return v ? "b1" : "b0";
  if (typeof v === "bigint") return "i" + v.toString();
  if (typeof v === "number") return "n" + v.toString();
  if (typeof v === "string") return "s" + JSON.stringify(v);
  if (isObject(v)) {
    const keys = Object.keys(v).sort();
    return "o{" + keys.map((k) => JSON.stringify(k) + ":" + canonicalKey(v[k])).join(",") + "}";
  }
  return "a[" + (v as PersistentArray).items().map(canonicalKey).join(",") + "]";
}

// ---------------------------------------------------------------------------
// Record operations
// ---------------------------------------------------------------------------

export function dot(o: EJson, label: string): EJson {
  const obj = asObject(o);
  if (!Object.prototype.hasOwnProperty.call(obj, label)) {
    fail(`missing field ${JSON.stringify(label)}`);
  }
  return obj[label];
}

export function rec(label: string, v: EJson): EJson {
  return { [label]: v };
}

export function concat(a: EJson, b: EJson): EJson {
  return { ...asObject(a), ...asObject(b) };
}

export function project(o: EJson, rawLabels: string[] | EJson): EJson {
  const obj = asObject(o);
  const out: { [key: string]: EJson } = {};
  for (const l of labelList(rawLabels)) {
    if (Object.prototype.hasOwnProperty.call(obj, l)) out[l] = obj[l];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Collection operations
// ---------------------------------------------------------------------------

export function coll(v: EJson): PersistentArray {
  return array(v);
}

export function union(a: EJson, b: EJson): PersistentArray {
  let out = asArray(a);
  for (const x of asArray(b).items()) out = out.push(x);
  return out;
}

export function distinct(a: EJson): PersistentArray {
  const seen = new Set<string>();
  const out: EJson[] = [];
  for (const x of asArray(a).items()) {
    const k = canonicalKey(x);
    if (!seen.has(k)) {
      seen.add(k);
      out.push(x);
    }
  }
  return new PersistentArray(out);
}

function bagCounts(a: PersistentArray): Map<string, number> {
  const counts = new Map<string, number>();
  for (const x of a.items()) {
    const k = canonicalKey(x);
    counts.set(k, (counts.get(k) || 0) + 1);
  }
  return counts;
}

export function minus(a: EJson, b: EJson): PersistentArray {
  const counts = bagCounts(asArray(b));
  const out: EJson[] = [];
  for (const x of asArray(a).items()) {
    const k = canonicalKey(x);
    const n = counts.get(k) || 0;
    if (n > 0) counts.set(k, n - 1);
    else out.push(x);
  }
  return new PersistentArray(out);
}

export function inter(a: EJson, b: EJson): PersistentArray {
  const counts = bagCounts(asArray(b));
  const out: EJson[] = [];
  for (const x of asArray(a).items()) {
    const k = canonicalKey(x);
    const n = counts.get(k) || 0;
    if (n > 0) {
      counts.set(k, n - 1);
      out.push(x);
    }
  }
  return new PersistentArray(out);
}

export function flatten(a: EJson): PersistentArray {
  const out: EJson[] = [];
  for (const x of asArray(a).items()) out.push(...asArray(x).items());
  return new PersistentArray(out);
}

export function first(a: EJson): EJson {
  const items = asArray(a).items();
  if (items.length === 0) fail("first of an empty array");
  return items[0];
}

export function count(a: EJson): bigint {
  return BigInt(asArray(a).items().length);
}

export function mem(v: EJson, a: EJson): boolean {
  return asArray(a).items().some((x) => equal(v, x));
}

export function sum(a: EJson): EJson {
  const items = asArray(a).items();
  if (items.every((x) => typeof x === "bigint")) {
    let total = 0n;
    for (const x of items) total += x as bigint;
    return total;
  }
  let total = 0;
  for (const x of items) {
    if (typeof x === "number") total += x;
    else if (typeof x === "bigint") total += Number(x);
    else fail(`sum over ${describe(x)}`);
  }
  return total;
}

function scalarFamily(v: EJson): string {
  if (typeof v === "boolean") return "bool";
  if (typeof v === "number" || typeof v === "bigint") return "num";
  if (typeof v === "string") return "text";
  return fail(`expected a scalar, got ${describe(v)}`);
}

function extreme(a: EJson, want: number): EJson {
  const items = asArray(a).items();
  if (items.length === 0) fail("min/max of an empty array");
  if (new Set(items.map(scalarFamily)).size > 1) {
    fail("min/max over mixed scalar families");
  }
  let best = items[0];
  for (const x of items.slice(1)) {
    // within one family compare gives the value order (bigint before
    // the numerically equal number, matching the compiler)
    if (compare(x, best) === want) best = x;
  }
  return best;
}

function numOf(v: EJson): number | bigint {
  if (typeof v === "number" || typeof v === "bigint") return v;
  return fail(`expected a number, got ${describe(v)}`);
}

export function min(a: EJson): EJson {
  return extreme(a, -1);
}

export function max(a: EJson): EJson {
  return extreme(a, 1);
}

/** Labels may arrive as a plain array or as a persistent array. */
function labelList(labels: string[] | EJson): string[] {
  if (Array.isArray(labels)) return labels as string[];
  return asArray(labels as EJson).items().map((x) => x as string);
}

export function group_by(
  a: EJson,
  g: string,
  rawLabels: string[] | EJson
): PersistentArray {
  const labels = labelList(rawLabels);
  const buckets = new Map<string, { key: EJson; members: EJson[] }>();
  for (const item of asArray(a).items()) {
    const o = asObject(item);
    for (const l of labels) {
      if (!Object.prototype.hasOwnProperty.call(o, l)) {
        fail(`grouping key ${JSON.stringify(l)} missing`);
      }
    }
    const keyObj = project(o, labels);
    const k = canonicalKey(keyObj);
    let bucket = buckets.get(k);
    if (!bucket) {
      bucket = { key: keyObj, members: [] };
      buckets.set(k, bucket);
    }
    bucket.members.push(item);
  }
  const out: EJson[] = [];
  for (const { key, members } of buckets.values()) {
    out.push({ ...asObject(key), [g]: new PersistentArray(members) });
  }
  return new PersistentArray(out);
}

// ---------------------------------------------------------------------------
// Scalar operations
// ---------------------------------------------------------------------------

export function not(v: EJson): boolean {
  if (typeof v !== "boolean") fail(`not on ${describe(v)}`);
  return !v;
}

export function uminus(v: EJson): EJson {
  if (typeof v === "bigint") return -v;
  if (typeof v === "number") return -v;
  return fail(`uminus on ${describe(v)}`);
}

export function to_float(v: EJson): number {
  return Number(numOf(v));
}

function cmpScalar(a: EJson, b: EJson): number {
  if (typeof a === "boolean" && typeof b === "boolean") {
    return (a ? 1 : 0) - (b ? 1 : 0);
  }
  if (
    (typeof a === "number" || typeof a === "bigint") &&
    (typeof b === "number" || typeof b === "bigint")
  ) {
    if (typeof a === "bigint" && typeof b === "bigint") {
      return a < b ? -1 : a > b ? 1 : 0;
    }
    const x = Number(a), y = Number(b);
    return x < y ? -1 : x > y ? 1 : 0;
  }
  if (typeof a === "string" && typeof b === "string") {
    return a < b ? -1 : a > b ? 1 : 0;
  }
  return fail(`incomparable scalars ${describe(a)} and ${describe(b)}`);
}

export function eq(a: EJson, b: EJson): boolean {
  return equal(a, b);
}

export function eq_sql(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) === 0;
}

export function neq_sql(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) !== 0;
}

export function lt(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) < 0;
}

export function le(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) <= 0;
}

export function gt(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) > 0;
}

export function ge(a: EJson, b: EJson): boolean {
  return cmpScalar(a, b) >= 0;
}

function arith(
  a: EJson,
  b: EJson,
  big: (x: bigint, y: bigint) => bigint,
  num: (x: number, y: number) => number
): EJson {
  if (typeof a === "bigint" && typeof b === "bigint") return big(a, b);
  return num(Number(numOf(a)), Number(numOf(b)));
}

export function add(a: EJson, b: EJson): EJson {
  return arith(a, b, (x, y) => x + y, (x, y) => x + y);
}

export function sub(a: EJson, b: EJson): EJson {
  return arith(a, b, (x, y) => x - y, (x, y) => x - y);
}

export function mul(a: EJson, b: EJson): EJson {
  return arith(a, b, (x, y) => x * y, (x, y) => x * y);
}

export function div(a: EJson, b: EJson): EJson {
  return arith(
    a,
    b,
    (x, y) => {
      if (y === 0n) fail("division by zero");
      return x / y; // bigint division truncates toward zero
    },
    (x, y) => {
      if (y === 0) fail("division by zero");
      return x / y;
    }
  );
}

export function strcat(a: EJson, b: EJson): string {
  if (typeof a !== "string" || typeof b !== "string") {
    fail(`strcat on ${describe(a)}, ${describe(b)}`);
  }
  return (a as string) + (b as string);
}

// ---------------------------------------------------------------------------
// Tagged-value helpers and coercions
// ---------------------------------------------------------------------------

export function left(v: EJson): EJson {
  return { $left: v };
}

export function right(v: EJson): EJson {
  return { $right: v };
}

export function either(v: EJson): boolean {
  const o = asObject(v);
  if (Object.prototype.hasOwnProperty.call(o, "$left")) return true;
  if (Object.prototype.hasOwnProperty.call(o, "$right")) return false;
  return fail("not an either value");
}

export function getLeft(v: EJson): EJson {
  const o = asObject(v);
  if (!Object.prototype.hasOwnProperty.call(o, "$left")) fail("not a left value");
  return o["$left"];
}

export function getRight(v: EJson): EJson {
  const o = asObject(v);
  if (!Object.prototype.hasOwnProperty.call(o, "$right")) fail("not a right value");
  return o["$right"];
}

export function push(a: EJson, v: EJson): PersistentArray {
  return asArray(a).push(v);
}

export function toBool(v: EJson): boolean {
  if (typeof v !== "boolean") fail(`expected a boolean, got ${describe(v)}`);
  return v as boolean;
}
