// Value-to-color mapping for the field viewer. Pure functions only: the
// same (value, range, mode) always yields the same color.

export type RangeMode = "auto" | "fixed";

export interface ColorRange {
  min: number;
  max: number;
}

// Sampled viridis stops; intermediate values interpolate linearly.
const STOPS: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

export function resolveRange(values: number[], mode: RangeMode,
                             fixed?: ColorRange): ColorRange {
  if (mode === "fixed" && fixed) {
    return { min: fixed.min, max: fixed.max };
  }
  if (values.length === 0) return { min: 0, max: 0 };
  let min = values[0];
  let max = values[0];
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  return { min, max };
}

/** Normalized position of a value inside the range, clamped to [0, 1].
 * A degenerate range (min == max) maps everything to 0 so an all-zero
 * array renders in a single color. */
export function normalize(value: number, range: ColorRange): number {
  const span = range.max - range.min;
  if (span <= 0) return 0;
  const t = (value - range.min) / span;
  return t < 0 ? 0 : t > 1 ? 1 : t;
}

export function scalarColor(value: number, range: ColorRange): string {
  const t = normalize(value, range);
  const pos = t * (STOPS.length - 1);
  const lo = Math.floor(pos);
  const hi = Math.min(lo + 1, STOPS.length - 1);
  const f = pos - lo;
  const c = STOPS[lo].map((a, i) => Math.round(a + (STOPS[hi][i] - a) * f));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}

/** CSS gradient stops for the legend bar, low to high. */
export function legendStops(): string[] {
  return STOPS.map((c) => `rgb(${c[0]},${c[1]},${c[2]})`);
}
