import { describe, expect, it } from "vitest";

import { arrowFor, computeRankDeltas } from "../src/rank";

describe("computeRankDeltas", () => {
  it("is zero for an unchanged order", () => {
    const deltas = computeRankDeltas(["a", "b", "c"], ["a", "b", "c"]);
    expect([...deltas.values()]).toEqual([0, 0, 0]);
  });

  it("measures upward movement as positive", () => {
    // doc moving from rank 5 (index 4) to rank 2 (index 1) => +3
    const prev = ["a", "b", "c", "d", "e"];
    const next = ["a", "e", "b", "c", "d"];
    expect(computeRankDeltas(prev, next).get("e")).toBe(3);
  });

  it("measures downward movement as negative", () => {
    const prev = ["a", "b", "c"];
    const next = ["b", "c", "a"];
    expect(computeRankDeltas(prev, next).get("a")).toBe(-2);
  });

  it("marks documents absent from the previous slate as null", () => {
    const deltas = computeRankDeltas(["a", "b"], ["a", "z"]);
    expect(deltas.get("z")).toBeNull();
  });

  it("is a pure function of the two orders", () => {
    const prev = ["x", "y"];
    const next = ["y", "x"];
    expect(computeRankDeltas(prev, next)).toEqual(
      computeRankDeltas([...prev], [...next]),
    );
  });
});

describe("arrowFor", () => {
  it("renders up arrows with magnitude", () => {
    expect(arrowFor(3)).toBe("↑3");
  });

  it("renders down arrows with magnitude", () => {
    expect(arrowFor(-2)).toBe("↓2");
  });

  it("renders equality for zero", () => {
    expect(arrowFor(0)).toBe("＝");
  });

  it("renders new entries distinctly", () => {
    expect(arrowFor(null)).toBe("new");
  });
});
