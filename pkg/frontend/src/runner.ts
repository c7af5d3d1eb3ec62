/**
 * Runner: execute a compiled query against a JSON database.
 *
 *   node dbcertRun.js <compiled.js> <db.json>
 *
 * Loads the compiled query, loads and pre-processes the database using
 * the query's schema sidecar (<query>.schema.json), executes, and
 * prints the post-processed result as JSON.  Compiled queries require
 * ./dbx_runtime.cjs next to them; the runner puts a copy there when
 * missing.
 */

import * as fs from "fs";
import * as path from "path";

import { InputError, postprocess, preprocess, Schema, stringifyRows } from "./preprocess";

export function ensureRuntime(queryPath: string): void {
  const dir = path.dirname(path.resolve(queryPath));
  const target = path.join(dir, "dbx_runtime.cjs");
  if (!fs.existsSync(target)) {
    const source = path.join(__dirname, "runtime.js");
    fs.copyFileSync(source, target);
  }
}

export function runQuery(queryPath: string, dbPath: string): string {
  if (!fs.existsSync(queryPath)) {
    throw new InputError(`no such file: ${queryPath}`);
  }
  if (!fs.existsSync(dbPath)) {
    throw new InputError(`no such file: ${dbPath}`);
  }
  const sidecarPath = queryPath.replace(/\.js$/, "") + ".schema.json";
  if (!fs.existsSync(sidecarPath)) {
    throw new InputError(`missing schema sidecar: ${sidecarPath}`);
  }
  ensureRuntime(queryPath);
  const schema = JSON.parse(fs.readFileSync(sidecarPath, "utf8")) as Schema;
  const dbJson = JSON.parse(fs.readFileSync(dbPath, "utf8"));
  // eslint-disable-next-line @typescript-eslint/no-var-requires
  const mod = require(path.resolve(queryPath));
  if (typeof mod.query !== "function") {
    throw new InputError(`${queryPath} does not export a query(db) function`);
  }
  const db = preprocess(dbJson, schema);
  let result;
  try {
    result = mod.query(db);
  } catch (err) {
    throw new Error(`query ${path.basename(queryPath)} failed: ${err}`);
  }
  return stringifyRows(postprocess(result));
}

export function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: dbcertRun.js <compiled.js> <db.json>");
    return 2;
  }
  try {
    console.log(runQuery(argv[0], argv[1]));
    return 0;
  } catch (err) {
    if (err instanceof InputError || err instanceof SyntaxError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
