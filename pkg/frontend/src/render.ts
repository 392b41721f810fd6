import { ColorRange, RangeMode, resolveRange, scalarColor } from "./colormap.js";
import type { FieldPayload } from "./types.js";

// Units for the built-in field arrays; DSL-derived quantities fall back
// to an empty label.
const FIELD_UNITS: Record<string, string> = {
  Jz_re: "A/m^2",
  Jz_im: "A/m^2",
  Jz_abs: "A/m^2",
  B_abs: "T",
  loss_density: "W/m^3",
};

export function fieldUnit(name: string): string {
  return FIELD_UNITS[name] ?? "";
}

/** Minimal drawing surface so rendering is testable without a real
 * canvas: the browser passes a CanvasRenderingContext2D adapter, tests
 * pass a recorder. */
export interface TrianglePainter {
  clear(width: number, height: number): void;
  fillTriangle(points: [number, number][], color: string): void;
}

export class CanvasPainter implements TrianglePainter {
  constructor(private ctx: CanvasRenderingContext2D) {}

  clear(width: number, height: number): void {
    this.ctx.clearRect(0, 0, width, height);
  }

  fillTriangle(points: [number, number][], color: string): void {
    const ctx = this.ctx;
    ctx.beginPath();
    ctx.moveTo(points[0][0], points[0][1]);
    ctx.lineTo(points[1][0], points[1][1]);
    ctx.lineTo(points[2][0], points[2][1]);
    ctx.closePath();
    ctx.fillStyle = color;
    ctx.fill();
    // stroke in the fill color to close hairline seams between triangles
    ctx.strokeStyle = color;
    ctx.lineWidth = 0.5;
    ctx.stroke();
  }
}

export interface RenderSelection {
  array: string;
  rangeMode: RangeMode;
  fixedRange?: ColorRange;
}

export interface LegendInfo {
  min: number;
  max: number;
  unit: string;
}

function fitTransform(nodes: [number, number][], width: number,
                      height: number) {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const [x, y] of nodes) {
    if (x < minX) minX = x;
    if (x > maxX) maxX = x;
    if (y < minY) minY = y;
    if (y > maxY) maxY = y;
  }
  const margin = 8;
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const scale = Math.min((width - 2 * margin) / spanX,
                         (height - 2 * margin) / spanY);
  const offX = (width - spanX * scale) / 2;
  const offY = (height - spanY * scale) / 2;
  // flip y so the model's +y points up on screen
  return (x: number, y: number): [number, number] =>
    [offX + (x - minX) * scale, height - offY - (y - minY) * scale];
}

/** Draw one filled triangle per element, colored from the selected array,
 * and report the legend range actually used. */
export function renderField(payload: FieldPayload, selection: RenderSelection,
                            painter: TrianglePainter, width: number,
                            height: number): LegendInfo {
  const values = payload.arrays[selection.array];
  if (!values) {
    throw new Error(`payload has no array ${selection.array}`);
  }
  const range = resolveRange(values, selection.rangeMode,
                             selection.fixedRange);
  const project = fitTransform(payload.nodes, width, height);
  painter.clear(width, height);
  payload.triangles.forEach((tri, i) => {
    const pts = tri.map((n) =>
      project(payload.nodes[n][0], payload.nodes[n][1])) as
      [number, number][];
    painter.fillTriangle(pts, scalarColor(values[i], range));
  });
  return { min: range.min, max: range.max, unit: fieldUnit(payload.name) };
}
