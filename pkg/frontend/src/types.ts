// JSON shapes served by the emsim HTTP API (schema_version 1).
// The client renders these verbatim; nothing here is recomputed.

export interface DiagnosticJson {
  severity: string;
  layer: string;
  message: string;
  line: number;
  column: number;
}

export interface VerdictEntry {
  status: "ok" | "failed" | "skipped" | "needs_human";
  diagnostics: DiagnosticJson[];
}

export interface ConductorFact {
  index: number;
  center: [number, number];
  current_A: number;
  loss_W_per_m: number;
}

export interface FactSheetJson {
  conductor_count: number;
  layout_descriptor: string;
  conductor_radius_m: number;
  boundary_radius_m: number;
  frequency_Hz: number;
  skin_depth_m: number | null;
  conductors: ConductorFact[];
  total_loss_W_per_m: number;
  artifacts: unknown[];
}

export interface ArtifactEntry {
  name: string;
  path: string;
}

export interface ReportJson {
  schema_version: number;
  mode: string;
  verdict: Record<string, VerdictEntry>;
  fact_sheet: FactSheetJson | null;
  summary: string | null;
  artifacts: ArtifactEntry[];
  provider_error: string | null;
}

export interface FieldPayload {
  schema_version: number;
  name: string;
  nodes: [number, number][];
  triangles: [number, number, number][];
  arrays: Record<string, number[]>;
  range: [number, number];
}

export type SessionStatus = "idle" | "running" | "done" | "failed";

export interface SessionInfo {
  schema_version: number;
  id: string;
  status: SessionStatus;
}

// Ladder order, mirrored from the report so rows render consistently even
// for layers the server had nothing to say about.
export const LAYERS = [
  "layout_syntax",
  "layout_semantics",
  "geometry_syntax",
  "geometry_semantics",
  "dsl_syntax",
  "dsl_semantics",
  "physics_syntax",
  "physics_semantics",
  "summary_syntax",
  "summary_semantics",
] as const;
