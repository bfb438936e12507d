/** Client-side state derived strictly from server payloads.
 *
 * Only fields present in the view JSON are carried over; nothing is
 * inferred about hidden bits of active hypotheses.  The sign shown on
 * an excluded cell comes from its revealed p-value and the public
 * masking thresholds.
 */

import type { CellState, HypothesisJson, SchemeJson, ViewJson } from "./types.js";

export interface Cell {
  index: number;
  x: number;
  y: number;
  g: number | null;
  state: CellState;
  p: number | null;
  /** +1/-1 for excluded cells with a revealed p, else null. */
  revealedSign: 1 | -1 | null;
}

export interface ViewModel {
  scheme: SchemeJson;
  alpha: number;
  step: number;
  stopped: boolean;
  estimate: number | null;
  cells: Cell[];
  isGrid: boolean;
  rows: number;
  cols: number;
  gMax: number;
}

function lowerThreshold(scheme: SchemeJson): number {
  if (scheme.variant === "tent" || scheme.variant === "railway") {
    return scheme.p_star ?? NaN;
  }
  return scheme.p_l ?? NaN;
}

export function revealedSign(h: HypothesisJson, scheme: SchemeJson): 1 | -1 | null {
  if (h.state === "excluded" && h.p !== null) {
    return h.p < lowerThreshold(scheme) ? 1 : -1;
  }
  return null;
}

/** Integer 2-D coordinates covering a full rectangle mean a grid layout. */
export function detectGrid(hypotheses: HypothesisJson[]): boolean {
  if (hypotheses.length === 0) return false;
  for (const h of hypotheses) {
    if (h.covariates.length !== 2) return false;
    if (!Number.isInteger(h.covariates[0]) || !Number.isInteger(h.covariates[1])) {
      return false;
    }
  }
  return true;
}

export function buildViewModel(view: ViewJson): ViewModel {
  const isGrid = detectGrid(view.hypotheses);
  const cells: Cell[] = view.hypotheses.map((h) => ({
    index: h.index,
    x: isGrid ? h.covariates[0] : 0,
    y: isGrid ? h.covariates[1] : 0,
    g: h.g,
    state: h.state,
    p: h.p,
    revealedSign: revealedSign(h, view.scheme),
  }));
  let rows = 0;
  let cols = 0;
  if (isGrid) {
    for (const c of cells) {
      rows = Math.max(rows, c.x + 1);
      cols = Math.max(cols, c.y + 1);
    }
  }
  let gMax = 0;
  for (const c of cells) {
    if (c.g !== null && c.g > gMax) gMax = c.g;
  }
  return {
    scheme: view.scheme,
    alpha: view.alpha,
    step: view.step,
    stopped: view.stopped,
    estimate: view.estimate,
    cells,
    isGrid,
    rows,
    cols,
    gMax: gMax > 0 ? gMax : 1,
  };
}
