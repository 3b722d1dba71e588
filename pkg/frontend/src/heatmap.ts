/**
 * Belt heatmap rendering. The belt runs top-to-bottom (frame axis 0); the
 * canvas scales the image up with the aspect ratio preserved and marks the
 * leading row with a horizontal cursor at its server-provided position.
 */

import { fillRgba } from "./colormap.js";
import { decodePixels, FrameMsg } from "./protocol.js";

/** Integer scale factor that fits (ny, nx) into (maxH, maxW), keeping aspect. */
export function fitScale(ny: number, nx: number, maxH: number, maxW: number): number {
  return Math.max(1, Math.floor(Math.min(maxH / ny, maxW / nx)));
}

export function drawHeatmap(canvas: HTMLCanvasElement, frame: FrameMsg,
                            maxH = 660, maxW = 260): void {
  const pixels = decodePixels(frame);
  if (!pixels) {
    return;  // degraded frame: keep the previous image
  }
  const ny = frame.pixel_ny!;
  const nx = frame.pixel_nx!;
  const scale = fitScale(ny, nx, maxH, maxW);
  canvas.width = nx * scale;
  canvas.height = ny * scale;
  const ctx = canvas.getContext("2d")!;

  const rgba = new Uint8ClampedArray(4 * ny * nx);
  fillRgba(pixels, rgba);
  const image = new ImageData(rgba, nx, ny);

  // paint at native resolution, then scale up without smoothing
  const off = document.createElement("canvas");
  off.width = nx;
  off.height = ny;
  off.getContext("2d")!.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, nx * scale, ny * scale);

  if (frame.leading_row_pixel !== null) {
    const down = frame.ny / ny;      // spatial downsample factor
    const y = (frame.leading_row_pixel / down) * scale;
    ctx.strokeStyle = "rgba(120, 255, 160, 0.9)";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(0, y);
    ctx.lineTo(canvas.width, y);
    ctx.stroke();
  }
}
