import { describe, expect, it } from "vitest";

import { array, EJson, PersistentArray } from "../src/runtime";

/** Naive copy-on-every-push oracle for the persistence semantics. */
class NaiveArray {
  constructor(public data: EJson[]) {}
  push(v: EJson): NaiveArray {
    return new NaiveArray([...this.data, v]);
  }
}

function bestOf(n: number, fn: () => void): number {
  let best = Infinity;
  for (let i = 0; i < n; i++) {
    const t0 = process.hrtime.bigint();
    fn();
    const dt = Number(process.hrtime.bigint() - t0);
    if (dt < best) best = dt;
  }
  return best;
}

describe("persistent arrays", () => {
  it("push creates a longer view and leaves the input unchanged", () => {
    const empty = array();
    const a = empty.push(1);
    expect(a.items()).toEqual([1]);
    expect(empty.items()).toEqual([]);
  });

  it("diverging views each observe their own prefix", () => {
    const a = array().push(1);
    const b = a.push(2);
    const c = a.push(3);
    expect(b.items()).toEqual([1, 2]);
    expect(c.items()).toEqual([1, 3]);
    expect(a.items()).toEqual([1]);
  });

  it("random push trees agree with the naive copying oracle", () => {
    let seed = 20240817;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    for (let round = 0; round < 50; round++) {
      const persistent: PersistentArray[] = [array()];
      const naive: NaiveArray[] = [new NaiveArray([])];
      for (let step = 0; step < 40; step++) {
        const i = Math.floor(rand() * persistent.length);
        const v = Math.floor(rand() * 100);
        persistent.push(persistent[i].push(v));
        naive.push(naive[i].push(v));
      }
      for (let i = 0; i < persistent.length; i++) {
        expect(persistent[i].items()).toEqual(naive[i].data);
      }
    }
  });

  it("copies the backing store only when the view diverged", () => {
    let a = array();
    const backing: EJson[][] = [];
    for (let i = 0; i < 100; i++) {
      a = a.push(i);
      backing.push(a.$content);
    }
    // linear use shares one backing array
    expect(new Set(backing).size).toBe(1);
    const fork = backing[0] && a;
    const b = (fork as PersistentArray).push(-1);
    const c = (fork as PersistentArray).push(-2);
    expect(b.$content).not.toBe(c.$content);
  });

  it("58,800 sequential pushes scale sub-quadratically", () => {
    const run = (n: number) => () => {
      let a = array();
      for (let i = 0; i < n; i++) a = a.push(i);
    };
    // the small workload is averaged over ten back-to-back runs so both
    // measurements see sustained allocation
    const ratioOf = (fn: (n: number) => () => void, reps: number) => {
      fn(58800)();
      fn(5880)();
      const small = bestOf(reps, () => {
        for (let k = 0; k < 10; k++) fn(5880)();
      });
      const big = bestOf(reps, fn(58800));
      return big / (small / 10);
    };
    const persistent = ratioOf(run, 9);

    // environment floor: the same loop over a bare native array; on VMs
    // whose allocator makes even that exceed the target, scaling is
    // judged against the floor instead of the absolute number
    const native = ratioOf(
      (n: number) => () => {
        const a: EJson[] = [];
        for (let i = 0; i < n; i++) a.push(i);
      },
      9
    );
    // a copy-per-push implementation measures in the thousands here, so
    // either bound rejects a quadratic regression by a wide margin
    if (native < 18) {
      expect(persistent).toBeLessThan(20);
    } else {
      expect(persistent).toBeLessThan(native * 2);
    }
  }, 120000);
});
