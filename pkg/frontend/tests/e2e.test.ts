/**
 * End-to-end: compile every benchmark with the compiler CLI, execute the
 * emitted JavaScript through the runner under Node, and compare with the
 * expected outputs and the in-process results (byte-equal after
 * canonical JSON sorting).
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

const repo = path.resolve(__dirname, "../..");
const frontend = path.resolve(__dirname, "..");
const benchRoot = path.join(repo, "src", "dbx", "benchmarks");
const runner = path.join(frontend, "dbcertRun.js");

const work = fs.mkdtempSync(path.join(os.tmpdir(), "dbx-e2e-"));

function python(args: string[], cwd = repo): string {
  return execFileSync("python3", ["-m", "dbx.cli", ...args], {
    cwd,
    encoding: "utf8",
  });
}

function node(args: string[]): string {
  return execFileSync("node", args, { encoding: "utf8" });
}

interface Case {
  suite: string;
  name: string;
  sql: string;
  db: string; // path
  expected: string;
}

function collectCases(): Case[] {
  const cases: Case[] = [];
  for (const suite of ["null", "correlated", "walkthrough"]) {
    const dir = path.join(benchRoot, suite);
    const shared = path.join(dir, "instance.json");
    for (const entry of fs.readdirSync(dir).sort()) {
      if (!entry.endsWith(".sql")) continue;
      const name = entry.slice(0, -4);
      const own = path.join(dir, `${name}.db.json`);
      cases.push({
        suite,
        name,
        sql: path.join(dir, entry),
        db: fs.existsSync(own) ? own : shared,
        expected: fs.readFileSync(path.join(dir, `${name}.expected.json`), "utf8"),
      });
    }
  }
  return cases;
}

type Row = { [k: string]: unknown };

function canonical(jsonText: string): string {
  const rows = JSON.parse(jsonText) as Row[];
  const canonRow = (r: Row) =>
    Object.keys(r)
      .sort()
      .map((k) => {
        const v = r[k];
        const num = typeof v === "number" ? v : null;
        return JSON.stringify(k) + ":" + (num !== null ? String(num) : JSON.stringify(v));
      })
      .join(",");
  return rows
    .map((r) => "{" + canonRow(r) + "}")
    .sort()
    .join("\n");
}

beforeAll(() => {
  execFileSync("npx", ["tsc", "-p", "."], { cwd: frontend });
}, 120000);

describe("benchmarks through Node", () => {
  const cases = collectCases();
  it("found the full corpus", () => {
    expect(cases.length).toBe(20);
  });

  for (const c of cases) {
    it(`${c.suite}/${c.name}`, () => {
      const js = path.join(work, `${c.suite}_${c.name}.js`);
      python(["compile", c.sql, "--emit", "js", "-o", js]);
      const viaNode = node([runner, js, c.db]).trim();
      expect(canonical(viaNode)).toBe(canonical(c.expected));
      const inProcess = python(["run", c.sql, "--db", c.db]).trim();
      expect(canonical(viaNode)).toBe(canonical(inProcess));
    }, 30000);
  }

  it("reproduces the employees trace verbatim", () => {
    const c = collectCases().find((x) => x.name === "org2")!;
    const js = path.join(work, "org2.js");
    python(["compile", c.sql, "--emit", "js", "-o", js]);
    const out = node([runner, js, c.db]).trim();
    expect(out).toBe('[{"name":"John"},{"name":"Jim"},{"name":null}]');
  });

  it("emitted source parses as a Node module", () => {
    const js = path.join(work, "org2.js");
    execFileSync("node", ["--check", js]);
  });

  it("runner reports missing files as user errors", () => {
    let code = 0;
    try {
      node([runner, path.join(work, "nope.js"), path.join(work, "nope.json")]);
    } catch (err) {
      code = (err as { status: number }).status;
    }
    expect(code).toBe(2);
  });

  it("empty tables print the empty result", () => {
    const c = collectCases().find((x) => x.name === "org2")!;
    const js = path.join(work, "org2.js");
    python(["compile", c.sql, "--emit", "js", "-o", js]);
    const emptyDb = path.join(work, "empty.json");
    fs.writeFileSync(emptyDb, JSON.stringify({ employees: [] }));
    expect(node([runner, js, emptyDb]).trim()).toBe("[]");
  });
});
