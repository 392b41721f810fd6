import { describe, expect, it } from "vitest";

import { legendStops } from "../src/colormap.js";
import { renderField } from "../src/render.js";
import type { FieldPayload } from "../src/types.js";
import { RecordingPainter } from "./helpers.js";

function squarePayload(values: number[]): FieldPayload {
  // unit square split into two triangles
  return {
    schema_version: 1,
    name: "Jz_abs",
    nodes: [[0, 0], [1, 0], [1, 1], [0, 1]],
    triangles: [[0, 1, 2], [0, 2, 3]],
    arrays: { Jz_abs: values },
    range: [Math.min(...values), Math.max(...values)],
  };
}

describe("renderField", () => {
  it("fills one triangle per element", () => {
    const painter = new RecordingPainter();
    renderField(squarePayload([1, 2]),
                { array: "Jz_abs", rangeMode: "auto" },
                painter, 100, 100);
    expect(painter.cleared).toBe(1);
    expect(painter.fills).toHaveLength(2);
  });

  it("renders an all-zero array in a single color with legend [0, 0]", () => {
    const painter = new RecordingPainter();
    const legend = renderField(squarePayload([0, 0]),
                               { array: "Jz_abs", rangeMode: "auto" },
                               painter, 100, 100);
    expect(legend.min).toBe(0);
    expect(legend.max).toBe(0);
    expect(new Set(painter.fills.map((f) => f.color)).size).toBe(1);
  });

  it("clamps values above a fixed range to the top color", () => {
    const painter = new RecordingPainter();
    const legend = renderField(
      squarePayload([50, 0.5]),
      { array: "Jz_abs", rangeMode: "fixed",
        fixedRange: { min: 0, max: 1 } },
      painter, 100, 100);
    const stops = legendStops();
    expect(painter.fills[0].color).toBe(stops[stops.length - 1]);
    expect(legend.max).toBe(1);
  });

  it("reports the unit for known arrays", () => {
    const painter = new RecordingPainter();
    const legend = renderField(squarePayload([1, 2]),
                               { array: "Jz_abs", rangeMode: "auto" },
                               painter, 100, 100);
    expect(legend.unit).toBe("A/m^2");
  });
});
