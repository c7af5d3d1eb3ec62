/** Tagged codec for the shared runtime test vectors. */

import * as rt from "../src/runtime";
import { EJson, PersistentArray } from "../src/runtime";

export type Tagged =
  | ["null"]
  | ["bool", boolean]
  | ["num", number]
  | ["int", string]
  | ["str", string]
  | ["obj", [string, Tagged][]]
  | ["arr", Tagged[]];

export function dec(v: Tagged): EJson {
  switch (v[0]) {
    case "null":
      return null;
    case "bool":
      return v[1];
    case "num":
      return v[1];
    case "int":
      return BigInt(v[1]);
    case "str":
      return v[1];
    case "obj": {
      const out: { [k: string]: EJson } = {};
      for (const [k, x] of v[1]) out[k] = dec(x);
      return out;
    }
    case "arr":
      return new PersistentArray(v[1].map(dec));
  }
}

export function enc(v: EJson): Tagged {
  if (v === null) return ["null"];
  if (typeof v === "boolean") return ["bool", v];
  if (typeof v === "number") return ["num", v];
  if (typeof v === "bigint") return ["int", v.toString()];
  if (typeof v === "string") return ["str", v];
  if (v instanceof PersistentArray) return ["arr", v.items().map(enc)];
  const keys = Object.keys(v).sort();
  return ["obj", keys.map((k) => [k, enc(v[k])] as [string, Tagged])];
}

function strings(v: EJson): string[] {
  return (v as PersistentArray).items().map((x) => x as string);
}

export function applyFn(fn: string, args: EJson[]): EJson {
  switch (fn) {
    case "not": return rt.not(args[0]);
    case "uminus": return rt.uminus(args[0]);
    case "to_float": return rt.to_float(args[0]);
    case "coll": return rt.coll(args[0]);
    case "distinct": return rt.distinct(args[0]);
    case "count": return rt.count(args[0]);
    case "sum": return rt.sum(args[0]);
    case "min": return rt.min(args[0]);
    case "max": return rt.max(args[0]);
    case "flatten": return rt.flatten(args[0]);
    case "left": return rt.left(args[0]);
    case "right": return rt.right(args[0]);
    case "first": return rt.first(args[0]);
    case "dot": return rt.dot(args[0], args[1] as string);
    case "rec": return rt.rec(args[0] as string, args[1]);
    case "project": return rt.project(args[0], strings(args[1]));
    case "group_by": return rt.group_by(args[0], args[1] as string, strings(args[2]));
    case "concat": return rt.concat(args[0], args[1]);
    case "union": return rt.union(args[0], args[1]);
    case "minus": return rt.minus(args[0], args[1]);
    case "inter": return rt.inter(args[0], args[1]);
    case "eq": return rt.eq(args[0], args[1]);
    case "mem": return rt.mem(args[0], args[1]);
    case "eq_sql": return rt.eq_sql(args[0], args[1]);
    case "neq_sql": return rt.neq_sql(args[0], args[1]);
    case "lt": return rt.lt(args[0], args[1]);
    case "le": return rt.le(args[0], args[1]);
    case "gt": return rt.gt(args[0], args[1]);
    case "ge": return rt.ge(args[0], args[1]);
    case "add": return rt.add(args[0], args[1]);
    case "sub": return rt.sub(args[0], args[1]);
    case "mul": return rt.mul(args[0], args[1]);
    case "div": return rt.div(args[0], args[1]);
    case "strcat": return rt.strcat(args[0], args[1]);
    case "either": return rt.either(args[0]);
    case "getLeft": return rt.getLeft(args[0]);
    case "getRight": return rt.getRight(args[0]);
    case "push": return rt.push(args[0], args[1]);
    case "array": return rt.array(...args);
    case "iter": return rt.array(...rt.iter(args[0]));
    case "toBool": return rt.toBool(args[0]);
    default:
      throw new Error(`unknown runtime function ${fn}`);
  }
}
