import { GRID_SIZE, BrushSettings, StrokePoint } from './types';

const clamp01 = (v: number): number => (v < 0 ? 0 : v > 1 ? 1 : v);

/**
 * Additive Gaussian stamp centered at (cx, cy), sigma = radius / 2,
 * truncated at 3 sigma. Returns a new clamped array; a zero-intensity
 * stamp returns an identical copy.
 */
export const stampGaussian = (
  values: Float64Array,
  cx: number,
  cy: number,
  brush: BrushSettings,
): Float64Array => {
  const out = values.slice();
  if (brush.intensity === 0 || brush.radius <= 0) return out;
  const sigma = brush.radius / 2;
  const reach = Math.ceil(3 * sigma);
  const x0 = Math.max(0, Math.floor(cx) - reach);
  const x1 = Math.min(GRID_SIZE - 1, Math.floor(cx) + reach);
  const y0 = Math.max(0, Math.floor(cy) - reach);
  const y1 = Math.min(GRID_SIZE - 1, Math.floor(cy) + reach);
  for (let y = y0; y <= y1; y += 1) {
    for (let x = x0; x <= x1; x += 1) {
      const d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      const bump = brush.intensity * Math.exp(-d2 / (2 * sigma * sigma));
      out[y * GRID_SIZE + x] = clamp01(out[y * GRID_SIZE + x] + bump);
    }
  }
  return out;
};

export const applyStroke = (
  values: Float64Array,
  path: StrokePoint[],
  brush: BrushSettings,
): Float64Array =>
  path.reduce((acc, p) => stampGaussian(acc, p.x, p.y, brush), values.slice());
