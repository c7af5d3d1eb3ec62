/**
 * Input and output adapters around compiled queries.
 *
 * preprocess boxes nullable values as {$left: v} / {$right: null},
 * qualifies record fields with their table name (the same scheme the
 * compiler uses), converts integer columns to bigints per the schema
 * sidecar, and wraps tables in persistent arrays.  postprocess inverts
 * the boxing and produces printable JSON.
 */

import { EJson, isArr, PersistentArray } from "./runtime";

export type Schema = { [table: string]: { [column: string]: string } };

const RESERVED = ["$left", "$right"];

export class InputError extends Error {}

function boxValue(v: unknown, type: string, where: string): EJson {
  if (v === null || v === undefined) {
    return { $right: null };
  }
  switch (type) {
    case "int":
      if (typeof v !== "number" || !Number.isInteger(v)) {
        throw new InputError(`${where}: expected an integer, got ${JSON.stringify(v)}`);
      }
      return { $left: BigInt(v) };
    case "double precision":
      if (typeof v !== "number") {
        throw new InputError(`${where}: expected a number, got ${JSON.stringify(v)}`);
      }
      return { $left: v };
    case "text":
      if (typeof v !== "string") {
        throw new InputError(`${where}: expected a string, got ${JSON.stringify(v)}`);
      }
      return { $left: v };
    case "boolean":
      if (typeof v !== "boolean") {
        throw new InputError(`${where}: expected a boolean, got ${JSON.stringify(v)}`);
      }
      return { $left: v };
    default:
      throw new InputError(`${where}: unknown column type ${type}`);
  }
}

export function preprocess(db: unknown, schema: Schema): EJson {
  if (typeof db !== "object" || db === null || Array.isArray(db)) {
    throw new InputError("database must be a JSON object of tables");
  }
  const input = db as { [table: string]: unknown };
  for (const t of Object.keys(input)) {
    if (!(t in schema)) throw new InputError(`unknown table ${JSON.stringify(t)}`);
  }
  const out: { [table: string]: EJson } = {};
  for (const table of Object.keys(schema)) {
    const columns = schema[table];
    const rows = (input[table] as unknown[]) || [];
    if (!Array.isArray(rows)) {
      throw new InputError(`table ${table} must be an array`);
    }
    const boxed: EJson[] = [];
    rows.forEach((row, i) => {
      if (typeof row !== "object" || row === null || Array.isArray(row)) {
        throw new InputError(`${table}[${i}] must be an object`);
      }
      const r = row as { [k: string]: unknown };
      for (const k of Object.keys(r)) {
        if (RESERVED.includes(k)) {
          throw new InputError(`${table}[${i}]: reserved key ${JSON.stringify(k)}`);
        }
        if (!(k in columns)) {
          throw new InputError(`${table}[${i}]: unknown column ${JSON.stringify(k)}`);
        }
      }
      const rec: { [k: string]: EJson } = {};
      for (const col of Object.keys(columns)) {
        rec[`${table}.${col}`] = boxValue(r[col], columns[col], `${table}[${i}].${col}`);
      }
      boxed.push(rec);
    });
    out[table] = new PersistentArray(boxed);
  }
  return out;
}

function unbox(v: EJson): EJson {
  if (typeof v === "object" && v !== null && !isArr(v)) {
    const keys = Object.keys(v);
    if (keys.length === 1 && keys[0] === "$left") return v["$left"];
    if (keys.length === 1 && keys[0] === "$right") return null;
  }
  return v;
}

export function postprocess(result: EJson): EJson[] {
  if (!isArr(result)) {
    throw new InputError("query result is not a collection");
  }
  return result.items().map((row) => {
    if (typeof row !== "object" || row === null || isArr(row)) {
      throw new InputError("query result row is not a record");
    }
    const out: { [k: string]: EJson } = {};
    for (const k of Object.keys(row).sort()) {
      out[k] = unbox(row[k]);
    }
    return out;
  });
}

/** JSON text with bigints as bare integer literals and sorted keys. */
export function stringify(v: EJson): string {
  if (v === null) return "null";
  if (typeof v === "boolean") return v ? "true" : "false";
  if (typeof v === "bigint") return v.toString();
  if (typeof v === "number") return JSON.stringify(v);
  if (typeof v === "string") return JSON.stringify(v);
  if (isArr(v)) {
    return "[" + v.items().map(stringify).join(",") + "]";
  }
  const keys = Object.keys(v).sort();
  return "{" + keys.map((k) => JSON.stringify(k) + ":" + stringify(v[k])).join(",") + "}";
}

export function stringifyRows(rows: EJson[]): string {
  return "[" + rows.map(stringify).join(",") + "]";
}
