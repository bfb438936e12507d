import { describe, expect, it } from "vitest";

import { parseJournal, statesAtPosition } from "../src/replay.js";
import { buildViewModel } from "../src/viewmodel.js";
import type { ViewJson } from "../src/types.js";

const JOURNAL =
  'abc123\t{"alpha":0.2}\n' +
  "1\t3\t0\n" +
  "2\t1,4\t0\n";

function finalView(): ViewJson {
  return {
    scheme: { variant: "tent", p_star: 0.2 },
    alpha: 0.2,
    k: 1,
    step: 2,
    stopped: true,
    estimate: null,
    hypotheses: [
      { index: 0, covariates: [0, 0], g: 0.01, state: "active", p: null },
      { index: 1, covariates: [1, 0], g: 0.1, state: "excluded", p: 0.6 },
      { index: 2, covariates: [2, 0], g: null, state: "middle_band", p: 0.3 },
      { index: 3, covariates: [3, 0], g: 0.05, state: "excluded", p: 0.9 },
      { index: 4, covariates: [4, 0], g: 0.02, state: "excluded", p: 0.7 },
    ],
  };
}

describe("journal parsing", () => {
  it("splits header and events", () => {
    const parsed = parseJournal(JOURNAL);
    expect(parsed.digest).toBe("abc123");
    expect(parsed.events).toHaveLength(2);
    expect(parsed.events[1]).toEqual({ step: 2, indices: [1, 4], rngCounter: 0 });
  });

  it("rejects malformed records", () => {
    expect(() => parseJournal("")).toThrow();
    expect(() => parseJournal("onlyheader")).toThrow();
  });
});

describe("scrubbing", () => {
  it("reconstructs intermediate states without mutating anything", () => {
    const vm = buildViewModel(finalView());
    const journal = parseJournal(JOURNAL);
    expect(statesAtPosition(vm, journal, 0)).toEqual([
      "active", "active", "middle_band", "active", "active",
    ]);
    expect(statesAtPosition(vm, journal, 1)).toEqual([
      "active", "active", "middle_band", "excluded", "active",
    ]);
    expect(statesAtPosition(vm, journal, 2)).toEqual([
      "active", "excluded", "middle_band", "excluded", "excluded",
    ]);
    // Positions beyond the log clamp to the final state.
    expect(statesAtPosition(vm, journal, 99)).toEqual(
      statesAtPosition(vm, journal, 2),
    );
    // The source view model is untouched.
    expect(vm.cells[3].state).toBe("excluded");
  });

  it("treats randomized step-0 records as non-exclusions", () => {
    const vm = buildViewModel(finalView());
    const journal = parseJournal('abc\t{}\n0\t2,4\t2\n');
    expect(statesAtPosition(vm, journal, 1)).toEqual([
      "active", "active", "middle_band", "active", "active",
    ]);
  });
});
