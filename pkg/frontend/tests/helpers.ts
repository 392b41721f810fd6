import type { ReportJson, VerdictEntry } from "../src/types.js";
import { LAYERS } from "../src/types.js";
import type { TrianglePainter } from "../src/render.js";

export function verdictWith(over: Record<string, VerdictEntry["status"]>,
                            base: VerdictEntry["status"] = "ok") {
  const verdict: Record<string, VerdictEntry> = {};
  for (const layer of LAYERS) {
    verdict[layer] = { status: over[layer] ?? base, diagnostics: [] };
  }
  return verdict;
}

export function emptyReport(
    over: Partial<ReportJson> = {}): ReportJson {
  return {
    schema_version: 1,
    mode: "with_post_and_summary",
    verdict: verdictWith({}),
    fact_sheet: null,
    summary: null,
    artifacts: [],
    provider_error: null,
    ...over,
  };
}

export interface Fill {
  points: [number, number][];
  color: string;
}

/** Painter that records every fill instead of drawing. */
export class RecordingPainter implements TrianglePainter {
  fills: Fill[] = [];
  cleared = 0;

  clear(): void {
    this.cleared += 1;
    this.fills = [];
  }

  fillTriangle(points: [number, number][], color: string): void {
    this.fills.push({ points, color });
  }
}
