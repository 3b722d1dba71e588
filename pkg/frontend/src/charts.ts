/**
 * Live trend charts drawn with plain canvas polylines: temperature (true,
 * predicted, dashed setpoint), belt speed, and flow rate over the rolling
 * buffer. The scaling math is pure for testability.
 */

import { TrendPoint } from "./buffer.js";

export interface Scale {
  min: number;
  max: number;
}

export function autoScale(values: number[], pad = 0.1, minRange = 1e-6): Scale {
  if (values.length === 0) {
    return { min: 0, max: 1 };
  }
  let min = Infinity;
  let max = -Infinity;
  for (const v of values) {
    if (v < min) min = v;
    if (v > max) max = v;
  }
  if (!(isFinite(min) && isFinite(max))) {
    return { min: 0, max: 1 };
  }
  if (max - min < minRange) {
    min -= minRange / 2;
    max += minRange / 2;
  }
  const span = max - min;
  return { min: min - pad * span, max: max + pad * span };
}

export function toY(value: number, scale: Scale, height: number): number {
  return height - ((value - scale.min) / (scale.max - scale.min)) * height;
}

interface Series {
  pick: (p: TrendPoint) => number | null;
  color: string;
  dashed?: boolean;
}

function drawSeries(ctx: CanvasRenderingContext2D, points: readonly TrendPoint[],
                    series: Series, scale: Scale, width: number, height: number): void {
  ctx.strokeStyle = series.color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash(series.dashed ? [6, 4] : []);
  ctx.beginPath();
  let pen = false;
  points.forEach((p, i) => {
    const v = series.pick(p);
    if (v === null || !isFinite(v)) {
      pen = false;
      return;
    }
    const x = (i / Math.max(points.length - 1, 1)) * width;
    const y = toY(v, scale, height);
    if (pen) {
      ctx.lineTo(x, y);
    } else {
      ctx.moveTo(x, y);
      pen = true;
    }
  });
  ctx.stroke();
  ctx.setLineDash([]);
}

function clear(canvas: HTMLCanvasElement): CanvasRenderingContext2D {
  const ctx = canvas.getContext("2d")!;
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

export function drawTemperatureChart(canvas: HTMLCanvasElement,
                                     points: readonly TrendPoint[]): void {
  const ctx = clear(canvas);
  if (points.length === 0) {
    return;
  }
  const values: number[] = [];
  for (const p of points) {
    if (p.trueTemp !== null) values.push(p.trueTemp);
    if (p.predTemp !== null) values.push(p.predTemp);
    values.push(p.setpoint);
  }
  const scale = autoScale(values);
  drawSeries(ctx, points, { pick: (p) => p.setpoint, color: "#e8e8e8", dashed: true },
             scale, canvas.width, canvas.height);
  drawSeries(ctx, points, { pick: (p) => p.trueTemp, color: "#f0a030" },
             scale, canvas.width, canvas.height);
  drawSeries(ctx, points, { pick: (p) => p.predTemp, color: "#40b0ff" },
             scale, canvas.width, canvas.height);
}

export function drawSpeedChart(canvas: HTMLCanvasElement,
                               points: readonly TrendPoint[]): void {
  const ctx = clear(canvas);
  if (points.length === 0) {
    return;
  }
  const scale = { min: 1.5, max: 12.5 };   // speed bounds plus margin
  drawSeries(ctx, points, { pick: (p) => p.speed, color: "#78ffa0" },
             scale, canvas.width, canvas.height);
}

export function drawFlowChart(canvas: HTMLCanvasElement,
                              points: readonly TrendPoint[]): void {
  const ctx = clear(canvas);
  if (points.length === 0) {
    return;
  }
  const scale = autoScale(points.map((p) => p.flow));
  drawSeries(ctx, points, { pick: (p) => p.flow, color: "#d080ff" },
             scale, canvas.width, canvas.height);
}
