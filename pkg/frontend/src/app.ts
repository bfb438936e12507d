/** Wires the heatmap, selection, automation and replay panels together.
 *
 * All state of record lives on the server; after every mutation the UI
 * refreshes from the authoritative view, and a 1-second poll keeps
 * passive watchers in sync.  One mutation is in flight at a time and
 * controls stay disabled while waiting or once the session stopped.
 */

import { ApiError, SessionApi, Transport } from "./api.js";
import { canvasSize, hitTest, render } from "./heatmap.js";
import { parseJournal, statesAtPosition, type ParsedJournal } from "./replay.js";
import { cellsInLasso, SelectionSet } from "./selection.js";
import { buildViewModel, type ViewModel } from "./viewmodel.js";
import type { ViewJson } from "./types.js";

const POLL_MS = 1000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  private api: SessionApi;
  private sessionId: string | null = null;
  private vm: ViewModel | null = null;
  private rejected = new Set<number>();
  private selection = new SelectionSet();
  private busy = false;
  private lassoStart: { x: number; y: number } | null = null;
  private journalText = "";
  private scrubbing = false;

  constructor() {
    this.api = new SessionApi(new Transport(""));
    el<HTMLButtonElement>("create").addEventListener("click", () => this.create());
    el<HTMLButtonElement>("exclude").addEventListener("click", () => this.excludeSelection());
    el<HTMLButtonElement>("auto").addEventListener("click", () => this.autoBurst());
    el<HTMLButtonElement>("clear-selection").addEventListener("click", () => {
      this.selection.clear();
      this.paint();
    });
    const canvas = el<HTMLCanvasElement>("heatmap");
    canvas.addEventListener("mousedown", (ev) => {
      this.lassoStart = this.canvasPoint(canvas, ev);
    });
    canvas.addEventListener("mouseup", (ev) => this.finishLasso(canvas, ev));
    el<HTMLInputElement>("scrub").addEventListener("input", () => this.scrub());
    el<HTMLButtonElement>("scrub-live").addEventListener("click", () => {
      this.scrubbing = false;
      el<HTMLElement>("scrub-label").textContent = "live";
      this.paint();
    });
    window.setInterval(() => this.poll(), POLL_MS);
  }

  private canvasPoint(canvas: HTMLCanvasElement, ev: MouseEvent) {
    const rect = canvas.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  private async create() {
    const rows = parseInt(el<HTMLInputElement>("rows").value, 10);
    const mu = parseFloat(el<HTMLInputElement>("mu").value);
    const seed = parseInt(el<HTMLInputElement>("seed").value, 10);
    const alpha = parseFloat(el<HTMLInputElement>("alpha").value);
    const pStar = parseFloat(el<HTMLInputElement>("p-star").value);
    await this.guard(async () => {
      const created = await this.api.createFromGenerator(
        {
          kind: "grid",
          rows,
          cols: rows,
          disc_center: [(rows - 1) / 2, (rows - 1) / 2],
          disc_radius: 2.5,
          mu_alt: mu,
          seed,
        },
        { scheme: { variant: "tent", p_star: pStar }, alpha },
      );
      this.sessionId = created.session_id;
      this.rejected.clear();
      this.selection.clear();
      this.scrubbing = false;
      await this.refresh(created.view);
      el<HTMLElement>("session-label").textContent = created.session_id;
    });
  }

  private async excludeSelection() {
    if (!this.sessionId || this.selection.size === 0) return;
    const indices = this.selection.values();
    await this.guard(async () => {
      const resp = await this.api.exclude(this.sessionId!, indices);
      this.selection.clear();
      await this.refresh(resp.view);
    });
  }

  private async autoBurst() {
    if (!this.sessionId) return;
    const strategy = el<HTMLSelectElement>("strategy").value;
    const scorer = el<HTMLSelectElement>("scorer").value;
    const steps = parseInt(el<HTMLInputElement>("steps").value, 10);
    await this.guard(async () => {
      const resp = await this.api.auto(this.sessionId!, strategy, {}, scorer, steps);
      await this.refresh(resp.view);
    });
  }

  private async guard(fn: () => Promise<void>) {
    if (this.busy) return;
    this.busy = true;
    this.updateControls();
    try {
      await fn();
      el<HTMLElement>("error").textContent = "";
    } catch (err) {
      el<HTMLElement>("error").textContent =
        err instanceof ApiError ? `server: ${err.body}` : String(err);
    } finally {
      this.busy = false;
      this.updateControls();
    }
  }

  private async poll() {
    if (!this.sessionId || this.busy || this.scrubbing) return;
    try {
      const view = await this.api.view(this.sessionId);
      await this.refresh(view);
    } catch {
      // transient polling errors surface on the next interaction
    }
  }

  private async refresh(view: ViewJson) {
    this.vm = buildViewModel(view);
    this.selection.pruneInactive(this.vm);
    this.journalText = await this.api.journal(this.sessionId!);
    if (view.stopped) {
      const result = await this.api.result(this.sessionId!);
      this.rejected = new Set(result.rejected);
    }
    const scrub = el<HTMLInputElement>("scrub");
    scrub.max = String(parseJournal(this.journalText).events.length);
    if (!this.scrubbing) scrub.value = scrub.max;
    this.updateControls();
    this.paint();
  }

  private updateControls() {
    const stopped = this.vm?.stopped ?? false;
    const disable = this.busy || stopped || this.sessionId === null;
    el<HTMLButtonElement>("exclude").disabled = disable || this.selection.size === 0;
    el<HTMLButtonElement>("auto").disabled = disable;
    el<HTMLButtonElement>("create").disabled = this.busy;
    el<HTMLElement>("stop-banner").hidden = !stopped;
    if (this.vm) {
      el<HTMLElement>("step-label").textContent = String(this.vm.step);
      el<HTMLElement>("estimate-label").textContent =
        this.vm.estimate !== null
          ? this.vm.estimate.toFixed(4)
          : this.vm.stopped
            ? "stopped"
            : "stop condition not yet met";
      const rejectedList = el<HTMLElement>("rejected-list");
      rejectedList.textContent = this.vm.stopped
        ? Array.from(this.rejected).sort((a, b) => a - b).join(", ") || "(none)"
        : "";
    }
  }

  private finishLasso(canvas: HTMLCanvasElement, ev: MouseEvent) {
    if (!this.vm || !this.lassoStart || this.vm.stopped) return;
    const end = this.canvasPoint(canvas, ev);
    const start = this.lassoStart;
    this.lassoStart = null;
    const moved = Math.abs(end.x - start.x) + Math.abs(end.y - start.y) > 4;
    if (moved) {
      this.selection.addAll(
        cellsInLasso(this.vm, { x0: start.x, y0: start.y, x1: end.x, y1: end.y }),
      );
    } else {
      const idx = hitTest(this.vm, end.x, end.y);
      if (idx !== null && this.vm.cells[idx].state === "active") {
        this.selection.toggle(idx);
      }
    }
    this.updateControls();
    this.paint();
  }

  private scrub() {
    if (!this.vm || !this.journalText) return;
    this.scrubbing = true;
    const position = parseInt(el<HTMLInputElement>("scrub").value, 10);
    const journal: ParsedJournal = parseJournal(this.journalText);
    const states = statesAtPosition(this.vm, journal, position);
    const ghost: ViewModel = {
      ...this.vm,
      cells: this.vm.cells.map((c, i) => ({
        ...c,
        state: states[i],
        p: states[i] === "active" ? null : c.p,
        revealedSign: states[i] === "active" ? null : c.revealedSign,
      })),
    };
    el<HTMLElement>("scrub-label").textContent =
      `after ${Math.min(position, journal.events.length)} of ${journal.events.length} events`;
    this.paintModel(ghost, new Set());
  }

  private paint() {
    if (!this.vm) return;
    if (!this.vm.isGrid) {
      this.paintTable();
      return;
    }
    this.paintModel(this.vm, this.rejected);
  }

  private paintModel(vm: ViewModel, rejected: Set<number>) {
    const canvas = el<HTMLCanvasElement>("heatmap");
    canvas.hidden = false;
    el<HTMLElement>("table-view").hidden = true;
    const { width, height } = canvasSize(vm);
    canvas.style.width = `${width}px`;
    canvas.style.height = `${height}px`;
    render(canvas, vm, rejected, this.selection.set);
  }

  private tableSort: { key: "index" | "state" | "g" | "p"; asc: boolean } = {
    key: "index",
    asc: true,
  };

  private paintTable() {
    const canvas = el<HTMLCanvasElement>("heatmap");
    canvas.hidden = true;
    const table = el<HTMLElement>("table-view");
    table.hidden = false;
    const { key, asc } = this.tableSort;
    const cells = this.vm!.cells.slice().sort((a, b) => {
      const av = a[key] ?? Infinity;
      const bv = b[key] ?? Infinity;
      const cmp = av < bv ? -1 : av > bv ? 1 : a.index - b.index;
      return asc ? cmp : -cmp;
    });
    const rows = cells
      .map(
        (c) =>
          `<tr><td>${c.index}</td><td>${c.state}</td>` +
          `<td>${c.g === null ? "" : c.g.toFixed(5)}</td>` +
          `<td>${c.p === null ? "" : c.p.toFixed(5)}</td></tr>`,
      )
      .join("");
    const headers: Array<[string, string]> = [
      ["index", "index"], ["state", "state"], ["g", "masked"], ["p", "p"],
    ];
    const head = headers
      .map(([k, label]) => `<th data-key="${k}" style="cursor:pointer">${label}</th>`)
      .join("");
    table.innerHTML = `<table><thead><tr>${head}</tr></thead><tbody>${rows}</tbody></table>`;
    table.querySelectorAll("th").forEach((th) => {
      th.addEventListener("click", () => {
        const k = th.dataset.key as "index" | "state" | "g" | "p";
        this.tableSort = {
          key: k,
          asc: this.tableSort.key === k ? !this.tableSort.asc : true,
        };
        this.paintTable();
      });
    });
  }
}

document.addEventListener("DOMContentLoaded", () => {
  new App();
});
