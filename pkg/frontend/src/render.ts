import { Rgb } from './colormap';
import { GRID_SIZE } from './types';

/**
 * Paint a 64x64 value grid onto a canvas with nearest-neighbor upscaling:
 * pixels are the unit of the model, so they stay visible as crisp squares.
 */
export const drawGrid = (
  canvas: HTMLCanvasElement,
  values: ArrayLike<number>,
  color: (v: number) => Rgb,
): void => {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const image = new ImageData(GRID_SIZE, GRID_SIZE);
  for (let i = 0; i < GRID_SIZE * GRID_SIZE; i += 1) {
    const [r, g, b] = color(values[i]);
    image.data[4 * i] = r;
    image.data[4 * i + 1] = g;
    image.data[4 * i + 2] = b;
    image.data[4 * i + 3] = 255;
  }
  const off = document.createElement('canvas');
  off.width = GRID_SIZE;
  off.height = GRID_SIZE;
  const octx = off.getContext('2d');
  if (!octx) return;
  octx.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
};

export const canvasToGrid = (
  canvas: HTMLCanvasElement,
  clientX: number,
  clientY: number,
): { x: number; y: number } => {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((clientX - rect.left) / rect.width) * GRID_SIZE,
    y: ((clientY - rect.top) / rect.height) * GRID_SIZE,
  };
};
