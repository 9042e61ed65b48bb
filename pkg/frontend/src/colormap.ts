// Fixed color scales: successive predictions must stay visually comparable,
// so the mapping from value to color never rescales per frame.

export type Rgb = [number, number, number];

export const HEAT_SCALE_MIN = 0.0;
export const HEAT_SCALE_MAX = 1.2; // predictions can exceed 1.0; keep headroom
export const DIFF_SCALE_ABS = 0.5;

const lerp = (a: number, b: number, t: number): number => a + (b - a) * t;

const rampColor = (stops: [number, Rgb][], t: number): Rgb => {
  const x = t < 0 ? 0 : t > 1 ? 1 : t;
  for (let i = 1; i < stops.length; i += 1) {
    const [t0, c0] = stops[i - 1];
    const [t1, c1] = stops[i];
    if (x <= t1) {
      const u = t1 === t0 ? 0 : (x - t0) / (t1 - t0);
      return [
        Math.round(lerp(c0[0], c1[0], u)),
        Math.round(lerp(c0[1], c1[1], u)),
        Math.round(lerp(c0[2], c1[2], u)),
      ];
    }
  }
  return stops[stops.length - 1][1];
};

// dark blue -> magenta -> orange -> light yellow, perceptually ordered
const HEAT_STOPS: [number, Rgb][] = [
  [0.0, [13, 8, 135]],
  [0.25, [126, 3, 168]],
  [0.5, [204, 71, 120]],
  [0.75, [248, 149, 64]],
  [1.0, [240, 249, 33]],
];

// blue -> white -> red, centered at zero
const DIFF_STOPS: [number, Rgb][] = [
  [0.0, [33, 102, 172]],
  [0.5, [247, 247, 247]],
  [1.0, [178, 24, 43]],
];

export const heatColor = (value: number): Rgb =>
  rampColor(HEAT_STOPS, (value - HEAT_SCALE_MIN) / (HEAT_SCALE_MAX - HEAT_SCALE_MIN));

export const diffColor = (value: number): Rgb =>
  rampColor(DIFF_STOPS, (value + DIFF_SCALE_ABS) / (2 * DIFF_SCALE_ABS));

// editing layers live in [0, 1]; reuse the heat ramp at full range
export const layerColor = (value: number): Rgb => rampColor(HEAT_STOPS, value);
