import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { applyFn, dec, enc, Tagged } from "./vectors";

interface Vector {
  fn: string;
  args: Tagged[];
  result?: Tagged;
  error?: boolean;
}

const file = path.resolve(__dirname, "../../tests/vectors/runtime_vectors.json");
const vectors: Vector[] = JSON.parse(fs.readFileSync(file, "utf8")).vectors;

describe("shared runtime vectors", () => {
  it("covers every runtime function at least five times", () => {
    const counts = new Map<string, number>();
    for (const v of vectors) counts.set(v.fn, (counts.get(v.fn) || 0) + 1);
    expect(counts.size).toBeGreaterThanOrEqual(40);
    for (const [, n] of counts) expect(n).toBeGreaterThanOrEqual(5);
  });

  vectors.forEach((v, i) => {
    it(`${i}: ${v.fn}`, () => {
      const args = v.args.map(dec);
      if (v.error) {
        expect(() => applyFn(v.fn, args)).toThrow();
        return;
      }
      expect(enc(applyFn(v.fn, args))).toEqual(v.result);
    });
  });
});
