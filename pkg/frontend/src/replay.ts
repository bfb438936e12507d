/** Read-only reconstruction of a session's history from its journal.
 *
 * Scrubbing is pure: it combines the journal text (already fetched)
 * with the latest view and issues no requests at all.
 */

import type { CellState } from "./types.js";
import type { ViewModel } from "./viewmodel.js";

export interface JournalEvent {
  step: number;
  indices: number[];
  rngCounter: number;
}

export interface ParsedJournal {
  digest: string;
  config: unknown;
  events: JournalEvent[];
}

export function parseJournal(text: string): ParsedJournal {
  const lines = text.split("\n").filter((ln) => ln.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty journal");
  }
  const head = lines[0].split("\t");
  if (head.length !== 2) {
    throw new Error("malformed journal header");
  }
  const events: JournalEvent[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split("\t");
    if (parts.length !== 3) {
      throw new Error(`malformed journal record: ${line}`);
    }
    events.push({
      step: parseInt(parts[0], 10),
      indices: parts[1] === "" ? [] : parts[1].split(",").map((s) => parseInt(s, 10)),
      rngCounter: parseInt(parts[2], 10),
    });
  }
  return { digest: head[0], config: JSON.parse(head[1]), events };
}

/** Cell states as they were after `position` journal events. */
export function statesAtPosition(
  vm: ViewModel,
  journal: ParsedJournal,
  position: number,
): CellState[] {
  const states: CellState[] = vm.cells.map((c) =>
    c.state === "middle_band" ? "middle_band" : "active",
  );
  const upto = Math.max(0, Math.min(position, journal.events.length));
  for (const event of journal.events.slice(0, upto)) {
    if (event.step === 0) continue; // randomized start rejections, not exclusions
    for (const idx of event.indices) {
      if (states[idx] === "active") states[idx] = "excluded";
    }
  }
  return states;
}
