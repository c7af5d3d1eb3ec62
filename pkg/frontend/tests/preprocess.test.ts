import { describe, expect, it } from "vitest";

import { InputError, postprocess, preprocess, stringify, stringifyRows } from "../src/preprocess";
import { PersistentArray } from "../src/runtime";

describe("preprocess", () => {
  it("boxes nullable values and qualifies keys", () => {
    const db = preprocess(
      { persons: [{ name: "John" }, { name: null }] },
      { persons: { name: "text" } }
    ) as { [t: string]: PersistentArray };
    const rows = db.persons.items() as { [k: string]: unknown }[];
    expect(rows[0]["persons.name"]).toEqual({ $left: "John" });
    expect(rows[1]["persons.name"]).toEqual({ $right: null });
  });

  it("integer columns become bigints, doubles stay numbers", () => {
    const db = preprocess(
      { e: [{ age: 34, score: 1.5 }] },
      { e: { age: "int", score: "double precision" } }
    ) as { [t: string]: PersistentArray };
    const row = db.e.items()[0] as { [k: string]: unknown };
    expect(row["e.age"]).toEqual({ $left: 34n });
    expect(row["e.score"]).toEqual({ $left: 1.5 });
  });

  it("rejects reserved keys and unknown columns", () => {
    expect(() =>
      preprocess({ t: [{ $left: 1 }] }, { t: { a: "int" } })
    ).toThrow(InputError);
    expect(() =>
      preprocess({ t: [{ b: 1 }] }, { t: { a: "int" } })
    ).toThrow(InputError);
    expect(() => preprocess({ nope: [] }, { t: { a: "int" } })).toThrow(InputError);
  });

  it("round trips null-free data modulo qualification", () => {
    const schema = { t: { a: "int", b: "text" } };
    const db = preprocess({ t: [{ a: 1, b: "x" }] }, schema) as {
      [t: string]: PersistentArray;
    };
    const back = postprocess(db.t);
    expect(back).toEqual([{ "t.a": 1n, "t.b": "x" }]);
  });

  it("postprocess unboxes left and right", () => {
    const rows = postprocess(
      new PersistentArray([
        { name: { $left: "John" } },
        { name: { $right: null } },
      ])
    );
    expect(stringifyRows(rows)).toBe('[{"name":"John"},{"name":null}]');
  });

  it("stringify prints bigints as bare integers with sorted keys", () => {
    expect(stringify({ c: 2n, A: null })).toBe('{"A":null,"c":2}');
    expect(stringify(new PersistentArray([1, "a", true]))).toBe('[1,"a",true]');
  });
});
