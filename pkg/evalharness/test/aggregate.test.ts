import { describe, expect, it } from "vitest";

import {
  aggregateSeeds,
  arithmeticMean,
  geometricMean,
  summarize,
} from "../src/aggregate";
import { Row } from "../src/records";

function row(
  instance: string,
  seed: number,
  metric: number,
  totalTime: number,
  algorithm = "detjet",
  balanced = true,
): Row {
  return {
    instanceKey: `${instance}/k=8`,
    instance,
    k: 8,
    seed,
    algorithm,
    threads: 1,
    metric,
    balanced,
    totalTime,
    phaseTimes: { total: totalTime },
  };
}

describe("aggregation methodology", () => {
  it("means are exact on integer inputs", () => {
    expect(arithmeticMean([3, 5, 7])).toBe(5);
    expect(arithmeticMean([2, 2, 2])).toBe(2);
    expect(geometricMean([2, 8])).toBe(4);
    expect(geometricMean([4])).toBe(4);
    expect(geometricMean([5, 0, 7])).toBe(0);
  });

  it("rejects empty and negative input", () => {
    expect(() => arithmeticMean([])).toThrow(/empty/);
    expect(() => geometricMean([])).toThrow(/empty/);
    expect(() => geometricMean([-1, 2])).toThrow(/nonnegative/);
  });

  it("aggregates seeds arithmetically, then instances geometrically", () => {
    // I1 seed metrics {1, 3} -> 2, I2 {8, 8} -> 8; gmean(2, 8) = 4.
    // Any other nesting gives a different number, so the exact value
    // pins the order of operations.
    const rows = [
      row("I1", 1, 1, 10),
      row("I1", 2, 3, 14),
      row("I2", 1, 8, 6),
      row("I2", 2, 8, 10),
    ];
    const aggs = aggregateSeeds(rows);
    expect(aggs.map((a) => a.quality)).toEqual([2, 8]);
    expect(aggs.map((a) => a.time)).toEqual([12, 8]);
    expect(aggs.map((a) => a.seeds)).toEqual([
      [1, 2],
      [1, 2],
    ]);
    const summary = summarize(aggs);
    expect(summary).toHaveLength(1);
    expect(summary[0].gmeanQuality).toBe(4);
    expect(summary[0].instances).toBe(2);
    expect(summary[0].failures).toBe(0);
  });

  it("keeps algorithms separate and sorts deterministically", () => {
    const rows = [
      row("I1", 1, 6, 1, "detflows"),
      row("I1", 1, 10, 1, "detjet"),
      row("I2", 1, 24, 1, "detflows"),
      row("I2", 1, 40, 1, "detjet"),
    ];
    const summary = summarize(aggregateSeeds(rows));
    expect(summary.map((s) => s.algorithm)).toEqual(["detflows", "detjet"]);
    expect(summary[0].gmeanQuality).toBe(12);
    expect(summary[1].gmeanQuality).toBe(20);
  });

  it("clamps timed-out runs to the limit in time aggregates", () => {
    const rows = [row("I1", 1, 5, 700), row("I1", 2, 5, 200)];
    const aggs = aggregateSeeds(rows, { timeLimitS: 600 });
    expect(aggs[0].time).toBe(400); // (600 + 200) / 2
    expect(aggs[0].quality).toBe(5); // metric untouched by the clamp
  });

  it("flags an instance as failed when any seed run is imbalanced", () => {
    const rows = [
      row("I1", 1, 5, 1),
      row("I1", 2, 6, 1, "detjet", false),
      row("I2", 1, 9, 1),
    ];
    const aggs = aggregateSeeds(rows);
    expect(aggs.map((a) => a.failed)).toEqual([true, false]);
    const summary = summarize(aggs);
    expect(summary[0].failures).toBe(1);
    // failed instances stay out of the geometric means
    expect(summary[0].gmeanQuality).toBe(9);
  });

  it("filters by thread count when asked", () => {
    const rows = [
      row("I1", 1, 5, 8),
      { ...row("I1", 1, 5, 2), threads: 4 },
    ];
    const aggs = aggregateSeeds(rows, { threads: 1 });
    expect(aggs).toHaveLength(1);
    expect(aggs[0].time).toBe(8);
  });

  it("geometric mean is scale invariant as a ratio statistic", () => {
    const a = [3, 5, 10];
    const b = [6, 10, 20];
    expect(geometricMean(b) / geometricMean(a)).toBeCloseTo(2, 12);
  });
});
