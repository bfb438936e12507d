/** Canvas heatmap of a session view.
 *
 * Active cells are shaded by their masked value (dark = small g, the
 * interesting end); excluded cells are drawn flat with a +/- glyph from
 * their revealed p; middle-band cells get a hatched style.  After the
 * session stops, rejected cells get a ring.  Non-grid sessions fall
 * back to a sortable table instead (see app.ts).
 */

import type { Cell, ViewModel } from "./viewmodel.js";

export const CELL_PX = 18;
export const CELL_GAP = 1;

export interface CellRect {
  x: number;
  y: number;
  size: number;
}

export function cellRect(cell: Cell): CellRect {
  return {
    x: cell.x * (CELL_PX + CELL_GAP),
    y: cell.y * (CELL_PX + CELL_GAP),
    size: CELL_PX,
  };
}

export function canvasSize(vm: ViewModel): { width: number; height: number } {
  return {
    width: vm.rows * (CELL_PX + CELL_GAP),
    height: vm.cols * (CELL_PX + CELL_GAP),
  };
}

/** Map canvas pixel coordinates back to a cell index, or null. */
export function hitTest(vm: ViewModel, px: number, py: number): number | null {
  const x = Math.floor(px / (CELL_PX + CELL_GAP));
  const y = Math.floor(py / (CELL_PX + CELL_GAP));
  if (x < 0 || y < 0 || x >= vm.rows || y >= vm.cols) return null;
  const cell = vm.cells.find((c) => c.x === x && c.y === y);
  return cell ? cell.index : null;
}

/** Shade for an active cell: smaller masked values draw darker. */
export function activeFill(g: number, gMax: number): string {
  const t = Math.max(0, Math.min(1, g / gMax));
  const light = 25 + 65 * t;
  return `hsl(215, 70%, ${light}%)`;
}

export function cellStyle(
  cell: Cell,
  vm: ViewModel,
  rejected: Set<number>,
): { fill: string; glyph: string | null; ring: boolean } {
  if (cell.state === "active") {
    return {
      fill: cell.g !== null ? activeFill(cell.g, vm.gMax) : "#888",
      glyph: null,
      ring: vm.stopped && rejected.has(cell.index),
    };
  }
  if (cell.state === "middle_band") {
    return { fill: "#c9c2a6", glyph: "~", ring: false };
  }
  return {
    fill: "#3b3b3b",
    glyph: cell.revealedSign === 1 ? "+" : cell.revealedSign === -1 ? "−" : null,
    ring: rejected.has(cell.index),
  };
}

export function render(
  canvas: HTMLCanvasElement,
  vm: ViewModel,
  rejected: Set<number>,
  selection: Set<number>,
): void {
  const { width, height } = canvasSize(vm);
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, width, height);
  ctx.font = `${CELL_PX - 6}px sans-serif`;
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  for (const cell of vm.cells) {
    const rect = cellRect(cell);
    const style = cellStyle(cell, vm, rejected);
    ctx.fillStyle = style.fill;
    ctx.fillRect(rect.x, rect.y, rect.size, rect.size);
    if (style.glyph) {
      ctx.fillStyle = "#f3f3f3";
      ctx.fillText(style.glyph, rect.x + rect.size / 2, rect.y + rect.size / 2 + 1);
    }
    if (style.ring) {
      ctx.strokeStyle = "#ffd021";
      ctx.lineWidth = 2;
      ctx.strokeRect(rect.x + 1, rect.y + 1, rect.size - 2, rect.size - 2);
    }
    if (selection.has(cell.index)) {
      ctx.strokeStyle = "#ff5470";
      ctx.lineWidth = 2;
      ctx.strokeRect(rect.x + 0.5, rect.y + 0.5, rect.size - 1, rect.size - 1);
    }
  }
}
