/** Click and lasso selection over the heatmap, in cell coordinates. */

import { CELL_GAP, CELL_PX } from "./heatmap.js";
import type { ViewModel } from "./viewmodel.js";

export interface LassoRect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Active cells whose centers fall inside the pixel rectangle. */
export function cellsInLasso(vm: ViewModel, rect: LassoRect): number[] {
  const xLo = Math.min(rect.x0, rect.x1);
  const xHi = Math.max(rect.x0, rect.x1);
  const yLo = Math.min(rect.y0, rect.y1);
  const yHi = Math.max(rect.y0, rect.y1);
  const picked: number[] = [];
  for (const cell of vm.cells) {
    if (cell.state !== "active") continue;
    const cx = cell.x * (CELL_PX + CELL_GAP) + CELL_PX / 2;
    const cy = cell.y * (CELL_PX + CELL_GAP) + CELL_PX / 2;
    if (cx >= xLo && cx <= xHi && cy >= yLo && cy <= yHi) {
      picked.push(cell.index);
    }
  }
  return picked.sort((a, b) => a - b);
}

export class SelectionSet {
  private indices = new Set<number>();

  toggle(index: number): void {
    if (this.indices.has(index)) {
      this.indices.delete(index);
    } else {
      this.indices.add(index);
    }
  }

  addAll(indices: number[]): void {
    for (const i of indices) this.indices.add(i);
  }

  clear(): void {
    this.indices.clear();
  }

  /** Drop anything that is no longer active in the latest view. */
  pruneInactive(vm: ViewModel): void {
    for (const i of Array.from(this.indices)) {
      const cell = vm.cells[i];
      if (!cell || cell.state !== "active") this.indices.delete(i);
    }
  }

  get set(): Set<number> {
    return this.indices;
  }

  get size(): number {
    return this.indices.size;
  }

  values(): number[] {
    return Array.from(this.indices).sort((a, b) => a - b);
  }
}
