/** Rolling trajectory buffer: the console keeps the last 1,000 steps. */

export interface TrendPoint {
  step: number;
  trueTemp: number | null;
  predTemp: number | null;
  setpoint: number;
  speed: number;
  flow: number;
}

export const BUFFER_CAP = 1000;

export class RollingBuffer {
  private points: TrendPoint[] = [];

  constructor(private cap: number = BUFFER_CAP) {}

  push(point: TrendPoint): void {
    // a reset restarts step numbering; drop the stale segment
    const last = this.points[this.points.length - 1];
    if (last !== undefined && point.step <= last.step) {
      this.points = [];
    }
    this.points.push(point);
    if (this.points.length > this.cap) {
      this.points.splice(0, this.points.length - this.cap);
    }
  }

  get length(): number {
    return this.points.length;
  }

  all(): readonly TrendPoint[] {
    return this.points;
  }

  clear(): void {
    this.points = [];
  }
}
