import { describe, expect, it } from "vitest";

import { activeFill, CELL_GAP, CELL_PX, cellRect, cellStyle, hitTest } from "../src/heatmap.js";
import { buildViewModel } from "../src/viewmodel.js";
import type { ViewJson } from "../src/types.js";

function gridView(stopped = false): ViewJson {
  return {
    scheme: { variant: "tent", p_star: 0.2 },
    alpha: 0.2,
    k: 1,
    step: 1,
    stopped,
    estimate: null,
    hypotheses: [
      { index: 0, covariates: [0, 0], g: 0.01, state: "active", p: null },
      { index: 1, covariates: [1, 0], g: 0.18, state: "active", p: null },
      { index: 2, covariates: [0, 1], g: null, state: "middle_band", p: 0.3 },
      { index: 3, covariates: [1, 1], g: 0.1, state: "excluded", p: 0.6 },
    ],
  };
}

describe("heatmap geometry", () => {
  it("places cells on the pixel lattice", () => {
    const vm = buildViewModel(gridView());
    const rect = cellRect(vm.cells[3]);
    expect(rect).toEqual({ x: CELL_PX + CELL_GAP, y: CELL_PX + CELL_GAP, size: CELL_PX });
  });

  it("hit testing inverts cell placement", () => {
    const vm = buildViewModel(gridView());
    for (const cell of vm.cells) {
      const rect = cellRect(cell);
      expect(hitTest(vm, rect.x + 2, rect.y + 2)).toBe(cell.index);
    }
    expect(hitTest(vm, 500, 500)).toBeNull();
  });
});

describe("cell styling", () => {
  it("shades active cells darker for smaller masked values", () => {
    const vm = buildViewModel(gridView());
    const dark = activeFill(0.01, vm.gMax);
    const light = activeFill(vm.gMax, vm.gMax);
    const lightness = (s: string) => parseFloat(s.match(/(\d+(\.\d+)?)%\)$/)![1]);
    expect(lightness(dark)).toBeLessThan(lightness(light));
  });

  it("marks excluded cells with the revealed side", () => {
    const vm = buildViewModel(gridView());
    const style = cellStyle(vm.cells[3], vm, new Set());
    expect(style.glyph).toBe("−");
  });

  it("marks the middle band distinctly", () => {
    const vm = buildViewModel(gridView());
    const style = cellStyle(vm.cells[2], vm, new Set());
    expect(style.glyph).toBe("~");
    expect(style.fill).not.toBe(cellStyle(vm.cells[3], vm, new Set()).fill);
  });

  it("rings rejected cells only once the session stopped", () => {
    const active = buildViewModel(gridView(false));
    expect(cellStyle(active.cells[0], active, new Set([0])).ring).toBe(false);
    const stopped = buildViewModel(gridView(true));
    expect(cellStyle(stopped.cells[0], stopped, new Set([0])).ring).toBe(true);
  });
});
