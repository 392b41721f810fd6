import { LAYERS, ReportJson, VerdictEntry } from "./types.js";

const STATUS_MARKS: Record<string, string> = {
  ok: "✓",
  failed: "✗",
  skipped: "–",
  needs_human: "?",
};

function calloutFor(layer: string): string {
  if (layer.startsWith("geometry")) {
    return "verify the layout visually, then confirm or re-prompt";
  }
  if (layer.startsWith("summary")) {
    return "review the summary against the fact sheet before trusting it";
  }
  return "this step needs a human decision before the result is trusted";
}

function diagnosticsBlock(doc: Document, entry: VerdictEntry): HTMLElement {
  const details = doc.createElement("details");
  details.className = "diagnostics";
  const summary = doc.createElement("summary");
  summary.textContent = `${entry.diagnostics.length} diagnostic(s)`;
  details.appendChild(summary);
  for (const d of entry.diagnostics) {
    const line = doc.createElement("div");
    line.className = `diag diag-${d.severity}`;
    const where = d.line > 0 ? ` (line ${d.line}, col ${d.column})` : "";
    line.textContent = `${d.severity}: ${d.message}${where}`;
    details.appendChild(line);
  }
  return details;
}

/** Build the verdict ladder: one row per layer in ladder order, marked
 * ok/failed/skipped/needs_human, with diagnostics expandable under the
 * row and a callout when a human has to look. */
export function buildLadder(doc: Document, report: ReportJson): HTMLElement {
  const list = doc.createElement("ul");
  list.className = "ladder";
  for (const layer of LAYERS) {
    const entry = report.verdict[layer];
    if (!entry) continue;
    const row = doc.createElement("li");
    row.className = `ladder-row status-${entry.status}`;
    row.dataset.layer = layer;
    row.dataset.status = entry.status;

    const mark = doc.createElement("span");
    mark.className = "mark";
    mark.textContent = STATUS_MARKS[entry.status] ?? "?";
    row.appendChild(mark);

    const name = doc.createElement("span");
    name.className = "layer-name";
    name.textContent = layer;
    row.appendChild(name);

    if (entry.status === "needs_human") {
      const badge = doc.createElement("span");
      badge.className = "badge needs-human";
      badge.textContent = "needs human";
      row.appendChild(badge);

      const callout = doc.createElement("div");
      callout.className = "callout";
      callout.textContent = calloutFor(layer);
      row.appendChild(callout);
    }

    if (entry.diagnostics.length > 0) {
      row.appendChild(diagnosticsBlock(doc, entry));
    }
    list.appendChild(row);
  }
  return list;
}
