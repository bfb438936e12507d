import { describe, expect, it } from "vitest";

import { CELL_GAP, CELL_PX } from "../src/heatmap.js";
import { cellsInLasso, SelectionSet } from "../src/selection.js";
import { buildViewModel } from "../src/viewmodel.js";
import type { ViewJson } from "../src/types.js";

function view(): ViewJson {
  const hypotheses = [];
  let index = 0;
  for (let x = 0; x < 3; x++) {
    for (let y = 0; y < 3; y++) {
      hypotheses.push({
        index: index++,
        covariates: [x, y],
        g: 0.05,
        state: (x === 2 && y === 2 ? "excluded" : "active") as "active" | "excluded",
        p: x === 2 && y === 2 ? 0.7 : null,
      });
    }
  }
  return {
    scheme: { variant: "tent", p_star: 0.2 },
    alpha: 0.2,
    k: 1,
    step: 0,
    stopped: false,
    estimate: null,
    hypotheses,
  };
}

describe("lasso", () => {
  it("collects active cells whose centers fall in the rectangle", () => {
    const vm = buildViewModel(view());
    const span = 2 * (CELL_PX + CELL_GAP) + CELL_PX;
    const all = cellsInLasso(vm, { x0: 0, y0: 0, x1: span, y1: span });
    expect(all).toHaveLength(8); // 9 cells minus the excluded corner
    const firstColumn = cellsInLasso(vm, { x0: 0, y0: 0, x1: CELL_PX, y1: span });
    expect(firstColumn).toEqual([0, 1, 2]);
  });

  it("supports dragging in any direction", () => {
    const vm = buildViewModel(view());
    const span = CELL_PX;
    const forward = cellsInLasso(vm, { x0: 0, y0: 0, x1: span, y1: span });
    const backward = cellsInLasso(vm, { x0: span, y0: span, x1: 0, y1: 0 });
    expect(backward).toEqual(forward);
  });
});

describe("selection set", () => {
  it("toggles and prunes cells that stop being active", () => {
    const vm = buildViewModel(view());
    const sel = new SelectionSet();
    sel.toggle(0);
    sel.toggle(8); // excluded cell can be staged but is pruned on refresh
    expect(sel.size).toBe(2);
    sel.pruneInactive(vm);
    expect(sel.values()).toEqual([0]);
    sel.toggle(0);
    expect(sel.size).toBe(0);
  });
});
