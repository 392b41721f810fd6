import { ApiClient, ApiError } from "./api.js";
import { legendStops } from "./colormap.js";
import { buildLadder } from "./ladder.js";
import { ReportPoller } from "./poll.js";
import { CanvasPainter, LegendInfo, TrianglePainter,
         renderField } from "./render.js";
import { ChatViewState, initialState, pushMessage, setStatus } from "./state.js";
import type { FieldPayload, ReportJson, SessionStatus } from "./types.js";

export const CORE_FIELDS = ["Jz_abs", "Jz_re", "Jz_im", "B_abs",
                            "loss_density"];

const CANVAS_W = 640;
const CANVAS_H = 480;

export const APP_HTML = `
<header>
  <h1>emsim</h1>
  <span id="status" class="status-pill">idle</span>
  <button id="new-session" type="button">new session</button>
</header>
<div id="notice" class="notice" hidden></div>
<form id="prompt-form">
  <textarea id="prompt-input" rows="3"
    placeholder="Describe a conductor arrangement..."></textarea>
  <button id="send" type="submit">send</button>
</form>
<ul id="transcript" class="transcript"></ul>
<section id="ladder-box" class="panel"></section>
<section id="summary-box" class="panel"></section>
<section id="facts-box" class="panel"></section>
<section class="panel viewer">
  <div class="viewer-controls">
    <select id="field-select"></select>
    <select id="range-mode">
      <option value="auto">auto range</option>
      <option value="fixed">fixed range</option>
    </select>
    <input id="range-min" type="number" value="0" step="any" disabled>
    <input id="range-max" type="number" value="1" step="any" disabled>
  </div>
  <canvas id="canvas" width="${CANVAS_W}" height="${CANVAS_H}"></canvas>
  <div id="legend" class="legend"></div>
</section>
`;

class NullPainter implements TrianglePainter {
  clear(): void {}
  fillTriangle(): void {}
}

function defaultPainter(canvas: HTMLCanvasElement): TrianglePainter {
  const ctx = canvas.getContext("2d");
  return ctx ? new CanvasPainter(ctx) : new NullPainter();
}

export interface AppOptions {
  api: ApiClient;
  pollIntervalMs?: number;
  painter?: (canvas: HTMLCanvasElement) => TrianglePainter;
}

export class App {
  state: ChatViewState = initialState();
  lastLegend: LegendInfo | null = null;

  private api: ApiClient;
  private poller: ReportPoller;
  private doc: Document;
  private makePainter: (canvas: HTMLCanvasElement) => TrianglePainter;
  // geometry arrives with the first field payload and is reused so that
  // switching arrays never refetches it
  private geometry: Pick<FieldPayload, "nodes" | "triangles"> | null = null;
  private arrays: Record<string, number[]> = {};
  private settled: Promise<void> = Promise.resolve();

  constructor(doc: Document, opts: AppOptions) {
    this.doc = doc;
    this.api = opts.api;
    this.poller = new ReportPoller(opts.api, opts.pollIntervalMs ?? 500);
    this.makePainter = opts.painter ?? defaultPainter;
  }

  private el<T extends HTMLElement>(id: string): T {
    const node = this.doc.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  wire(): void {
    this.el<HTMLFormElement>("prompt-form").addEventListener("submit",
      (ev) => {
        ev.preventDefault();
        this.settled = this.submit();
      });
    this.el<HTMLButtonElement>("new-session").addEventListener("click",
      () => { this.settled = this.newSession(); });
    this.el<HTMLSelectElement>("field-select").addEventListener("change",
      (ev) => {
        this.state.selectedField = (ev.target as HTMLSelectElement).value;
        this.settled = this.renderSelected();
      });
    this.el<HTMLSelectElement>("range-mode").addEventListener("change",
      (ev) => {
        this.state.rangeMode =
          (ev.target as HTMLSelectElement).value as "auto" | "fixed";
        this.syncRangeInputs();
        this.settled = this.renderSelected();
      });
    for (const id of ["range-min", "range-max"]) {
      this.el<HTMLInputElement>(id).addEventListener("change", () => {
        this.state.fixedMin =
          Number(this.el<HTMLInputElement>("range-min").value);
        this.state.fixedMax =
          Number(this.el<HTMLInputElement>("range-max").value);
        this.settled = this.renderSelected();
      });
    }
  }

  /** Resolves when the last user-triggered action finished; tests await
   * this instead of sleeping. */
  whenSettled(): Promise<void> {
    return this.settled;
  }

  async newSession(): Promise<void> {
    this.poller.stop();
    this.state = initialState();
    this.geometry = null;
    this.arrays = {};
    this.lastLegend = null;
    try {
      this.state.sessionId = await this.api.createSession();
      this.notice(null);
    } catch (err) {
      this.notice(err instanceof Error ? err.message : String(err));
    }
    this.renderAll();
  }

  async submit(): Promise<void> {
    const input = this.el<HTMLTextAreaElement>("prompt-input");
    const text = input.value;
    if (!text.trim()) {
      this.notice("enter a prompt first");
      return;
    }
    if (this.state.status === "running" || !this.state.sessionId) return;
    try {
      await this.api.sendPrompt(this.state.sessionId, text);
    } catch (err) {
      this.notice(err instanceof ApiError ? err.message : String(err));
      return;
    }
    this.notice(null);
    pushMessage(this.state, "user", text);
    input.value = "";
    setStatus(this.state, "running");
    this.renderAll();
    this.poller.start(this.state.sessionId, {
      onStatus: (status) => this.onStatus(status),
      onReport: (report) => { this.settled = this.onReport(report); },
      onError: (err) => {
        this.notice(err instanceof Error ? err.message : String(err));
        setStatus(this.state, "failed");
        this.renderAll();
      },
    });
  }

  private onStatus(status: SessionStatus): void {
    setStatus(this.state, status);
    this.renderStatus();
  }

  private async onReport(report: ReportJson): Promise<void> {
    this.state.report = report;
    pushMessage(this.state, "system",
                report.summary ?? "run finished, see the verdict ladder");
    if (report.provider_error) {
      this.notice(`provider: ${report.provider_error}`);
    }
    this.renderAll();
    await this.renderSelected();
  }

  private notice(text: string | null): void {
    const box = this.el<HTMLElement>("notice");
    box.hidden = text === null;
    box.textContent = text ?? "";
  }

  private syncRangeInputs(): void {
    const fixed = this.state.rangeMode === "fixed";
    this.el<HTMLInputElement>("range-min").disabled = !fixed;
    this.el<HTMLInputElement>("range-max").disabled = !fixed;
  }

  private renderStatus(): void {
    this.el<HTMLElement>("status").textContent = this.state.status;
    const running = this.state.status === "running";
    this.el<HTMLTextAreaElement>("prompt-input").disabled = running;
    this.el<HTMLButtonElement>("send").disabled = running;
  }

  private renderTranscript(): void {
    const list = this.el<HTMLUListElement>("transcript");
    list.textContent = "";
    for (const msg of this.state.messages) {
      const item = this.doc.createElement("li");
      item.className = `msg msg-${msg.role}`;
      item.textContent = `${msg.role}: ${msg.text}`;
      list.appendChild(item);
    }
  }

  private renderLadder(): void {
    const box = this.el<HTMLElement>("ladder-box");
    box.textContent = "";
    if (this.state.report) {
      box.appendChild(buildLadder(this.doc, this.state.report));
    }
  }

  private renderSummary(): void {
    const box = this.el<HTMLElement>("summary-box");
    box.textContent = "";
    const report = this.state.report;
    if (!report) return;
    const heading = this.doc.createElement("h2");
    heading.textContent = "summary";
    box.appendChild(heading);
    const body = this.doc.createElement("p");
    body.id = "summary-text";
    body.textContent = report.summary ??
      "no summary was released for this run";
    box.appendChild(body);
  }

  private renderFacts(): void {
    const box = this.el<HTMLElement>("facts-box");
    box.textContent = "";
    const facts = this.state.report?.fact_sheet;
    if (!facts) return;
    const heading = this.doc.createElement("h2");
    heading.textContent = "fact sheet";
    box.appendChild(heading);
    const dl = this.doc.createElement("dl");
    // numbers go in exactly as the server sent them
    const rows: [string, string][] = [
      ["conductors", String(facts.conductor_count)],
      ["layout", facts.layout_descriptor],
      ["conductor radius (m)", String(facts.conductor_radius_m)],
      ["frequency (Hz)", String(facts.frequency_Hz)],
      ["skin depth (m)", facts.skin_depth_m === null ? "n/a"
        : String(facts.skin_depth_m)],
      ["total loss (W/m)", String(facts.total_loss_W_per_m)],
    ];
    for (const [term, value] of rows) {
      const dt = this.doc.createElement("dt");
      dt.textContent = term;
      const dd = this.doc.createElement("dd");
      dd.textContent = value;
      dl.appendChild(dt);
      dl.appendChild(dd);
    }
    box.appendChild(dl);
    const table = this.doc.createElement("table");
    table.id = "conductor-table";
    for (const c of facts.conductors) {
      const tr = this.doc.createElement("tr");
      for (const cell of [String(c.index),
                          `(${c.center[0]}, ${c.center[1]})`,
                          String(c.current_A), String(c.loss_W_per_m)]) {
        const td = this.doc.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
    box.appendChild(table);
  }

  private renderFieldOptions(): void {
    const select = this.el<HTMLSelectElement>("field-select");
    const names = [...CORE_FIELDS];
    const bookkeeping = new Set(["layout", "mesh", "mesh_vtk", "solution"]);
    for (const art of this.state.report?.artifacts ?? []) {
      const derived = `${art.name}_abs`;
      if (!bookkeeping.has(art.name) && !names.includes(derived)) {
        names.push(derived);
      }
    }
    select.textContent = "";
    for (const name of names) {
      const option = this.doc.createElement("option");
      option.value = name;
      option.textContent = name;
      option.selected = name === this.state.selectedField;
      select.appendChild(option);
    }
  }

  private renderLegend(): void {
    const box = this.el<HTMLElement>("legend");
    box.textContent = "";
    if (!this.lastLegend) return;
    const bar = this.doc.createElement("div");
    bar.className = "legend-bar";
    bar.style.background =
      `linear-gradient(to right, ${legendStops().join(", ")})`;
    box.appendChild(bar);
    const label = this.doc.createElement("span");
    label.id = "legend-label";
    const unit = this.lastLegend.unit ? ` ${this.lastLegend.unit}` : "";
    label.textContent =
      `[${this.lastLegend.min}, ${this.lastLegend.max}]${unit}`;
    box.appendChild(label);
  }

  async renderSelected(): Promise<void> {
    const canvas = this.el<HTMLCanvasElement>("canvas");
    const name = this.state.selectedField;
    if (!this.state.sessionId || !this.state.report) return;
    if (!(name in this.arrays)) {
      try {
        const payload = await this.api.field(this.state.sessionId, name);
        if (!this.geometry) {
          this.geometry = { nodes: payload.nodes,
                            triangles: payload.triangles };
        }
        this.arrays[name] = payload.arrays[name];
      } catch (err) {
        if (err instanceof ApiError && err.status === 404) {
          this.lastLegend = null;
          this.renderLegend();
          this.emptyState("no field data in this session");
          return;
        }
        this.notice(err instanceof Error ? err.message : String(err));
        return;
      }
    }
    const payload: FieldPayload = {
      schema_version: 1,
      name,
      nodes: this.geometry!.nodes,
      triangles: this.geometry!.triangles,
      arrays: { [name]: this.arrays[name] },
      range: [0, 0],
    };
    this.lastLegend = renderField(payload, {
      array: name,
      rangeMode: this.state.rangeMode,
      fixedRange: { min: this.state.fixedMin, max: this.state.fixedMax },
    }, this.makePainter(canvas), canvas.width, canvas.height);
    this.renderLegend();
    canvas.dataset.empty = "";
  }

  private emptyState(text: string): void {
    const canvas = this.el<HTMLCanvasElement>("canvas");
    canvas.dataset.empty = text;
  }

  renderAll(): void {
    this.renderStatus();
    this.renderTranscript();
    this.renderLadder();
    this.renderSummary();
    this.renderFacts();
    this.renderFieldOptions();
    this.syncRangeInputs();
  }
}

/** Inject the UI into #app, wire events and open a session. */
export async function mount(doc: Document, opts: AppOptions): Promise<App> {
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app container");
  root.innerHTML = APP_HTML;
  const app = new App(doc, opts);
  app.wire();
  await app.newSession();
  return app;
}
