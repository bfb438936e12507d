/**
 * End-to-end transcript audit against the real session service.
 *
 * Drives create -> lasso exclude -> automation -> result through the
 * same client the UI uses, with the transport recording every byte on
 * the wire.  The recorded transcript must never contain a hidden-bit
 * field, and replay scrubbing must not issue a single request.
 */

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi, Transport } from "../src/api.js";
import { parseJournal, statesAtPosition } from "../src/replay.js";
import { cellsInLasso } from "../src/selection.js";
import { CELL_GAP, CELL_PX } from "../src/heatmap.js";
import { buildViewModel } from "../src/viewmodel.js";

const PORT = 8631;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const resp = await fetch(`${BASE}/sessions/probe/view`);
      if (resp.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error("session service did not come up");
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "ifwer.cli", "serve", "--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForServer();
}, 30000);

afterAll(() => {
  server.kill();
});

describe("recorded browser-style session", () => {
  it("contains no hidden-bit bytes and scrubbing issues no requests", async () => {
    const transport = new Transport(BASE);
    transport.startRecording();
    const api = new SessionApi(transport);

    const created = await api.createFromGenerator(
      { kind: "grid", rows: 8, cols: 8, disc_center: [3.5, 3.5], disc_radius: 1.5, mu_alt: 3.0, seed: 5 },
      { scheme: { variant: "tent", p_star: 0.1 }, alpha: 0.2 },
    );
    const sid = created.session_id;
    let vm = buildViewModel(created.view);

    // Lasso the top-left corner and exclude it manually.
    const lassoSpan = 2 * (CELL_PX + CELL_GAP) + CELL_PX;
    const picked = cellsInLasso(vm, { x0: 0, y0: 0, x1: lassoSpan, y1: lassoSpan });
    expect(picked.length).toBeGreaterThan(0);
    const afterExclude = await api.exclude(sid, picked);
    vm = buildViewModel(afterExclude.view);
    expect(vm.step).toBe(1);

    // Automation bursts until the session stops.
    for (let i = 0; i < 50 && !vm.stopped; i++) {
      const r = await api.auto(sid, "cone_peel", { cone_d: 4, cone_delta: 0.1 }, "neg_g", 10);
      vm = buildViewModel(r.view);
    }
    expect(vm.stopped).toBe(true);

    const result = await api.result(sid);
    expect(Array.isArray(result.rejected)).toBe(true);
    const journalText = await api.journal(sid);

    // 1. No payload in the whole exchange carries a hidden-bit field.
    const transcript = transport.transcript();
    expect(transcript.length).toBeGreaterThan(3);
    for (const record of transcript) {
      expect(record.responseBody).not.toContain("hidden");
      expect(record.requestBody ?? "").not.toContain("hidden");
    }

    // 2. Replay scrubbing is pure: no request crosses the transport.
    const before = transport.transcript().length;
    const journal = parseJournal(journalText);
    for (let pos = 0; pos <= journal.events.length; pos++) {
      statesAtPosition(vm, journal, pos);
    }
    expect(transport.transcript().length).toBe(before);

    // 3. The only mutating requests are the explicit POSTs we made.
    const posts = transcript.filter((r) => r.method !== "GET");
    for (const record of posts) {
      expect(record.method).toBe("POST");
      expect(record.url).toMatch(/\/sessions($|\/.*\/(exclude|auto)$)/);
    }
  }, 60000);
});
