/**
 * Thermal colormap: 0 maps to the coldest color, 1 to the hottest.
 * Piecewise-linear dark-blue -> violet -> orange -> near-white ramp.
 */

const STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [12, 16, 48]],
  [0.25, [64, 24, 112]],
  [0.5, [178, 60, 60]],
  [0.75, [240, 150, 48]],
  [1.0, [255, 244, 214]],
];

export function thermalColor(value: number): [number, number, number] {
  const v = Math.min(Math.max(value, 0), 1);
  for (let i = 1; i < STOPS.length; i++) {
    const [hi, chi] = STOPS[i];
    const [lo, clo] = STOPS[i - 1];
    if (v <= hi) {
      const t = (v - lo) / (hi - lo);
      return [
        Math.round(clo[0] + t * (chi[0] - clo[0])),
        Math.round(clo[1] + t * (chi[1] - clo[1])),
        Math.round(clo[2] + t * (chi[2] - clo[2])),
      ];
    }
  }
  return STOPS[STOPS.length - 1][1];
}

/** Fill an RGBA buffer (4 bytes per pixel) from normalized pixel values. */
export function fillRgba(values: Float32Array, rgba: Uint8ClampedArray): void {
  for (let i = 0; i < values.length; i++) {
    const [r, g, b] = thermalColor(values[i]);
    rgba[4 * i] = r;
    rgba[4 * i + 1] = g;
    rgba[4 * i + 2] = b;
    rgba[4 * i + 3] = 255;
  }
}
