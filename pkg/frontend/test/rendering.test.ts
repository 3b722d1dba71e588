import { describe, expect, it } from "vitest";

import { BUFFER_CAP, RollingBuffer } from "../src/buffer.js";
import { autoScale, toY } from "../src/charts.js";
import { fillRgba, thermalColor } from "../src/colormap.js";
import { fitScale } from "../src/heatmap.js";

describe("thermal colormap", () => {
  it("maps 0 to the coldest color and 1 to the hottest", () => {
    expect(thermalColor(0)).toEqual([12, 16, 48]);
    expect(thermalColor(1)).toEqual([255, 244, 214]);
  });

  it("clamps out-of-range values", () => {
    expect(thermalColor(-3)).toEqual(thermalColor(0));
    expect(thermalColor(7)).toEqual(thermalColor(1));
  });

  it("is monotone in perceived warmth (red channel)", () => {
    let previous = -1;
    for (let v = 0; v <= 1.0001; v += 0.05) {
      const [r] = thermalColor(v);
      expect(r).toBeGreaterThanOrEqual(previous);
      previous = r;
    }
  });

  it("renders an all-zero frame as a uniform background", () => {
    const values = new Float32Array(12);
    const rgba = new Uint8ClampedArray(48);
    fillRgba(values, rgba);
    const [r, g, b] = thermalColor(0);
    for (let i = 0; i < 12; i++) {
      expect([rgba[4 * i], rgba[4 * i + 1], rgba[4 * i + 2], rgba[4 * i + 3]])
        .toEqual([r, g, b, 255]);
    }
  });

  it("renders a single hot row as one bright band", () => {
    // 4 rows x 3 cols, row 2 hot
    const values = new Float32Array(12);
    for (let x = 0; x < 3; x++) values[2 * 3 + x] = 1.0;
    const rgba = new Uint8ClampedArray(48);
    fillRgba(values, rgba);
    const warm = (row: number) => rgba[4 * row * 3];    // red of first col
    expect(warm(2)).toBeGreaterThan(warm(0));
    expect(warm(2)).toBeGreaterThan(warm(3));
  });
});

describe("heatmap scaling", () => {
  it("preserves aspect ratio with integer scales", () => {
    expect(fitScale(637, 65, 660, 260)).toBe(1);
    expect(fitScale(160, 17, 660, 260)).toBe(4);     // limited by height
    expect(fitScale(40, 65, 660, 260)).toBe(4);      // limited by width
  });

  it("never returns scale 0 for oversized frames", () => {
    expect(fitScale(2000, 500, 660, 260)).toBe(1);
  });
});

describe("chart scaling", () => {
  it("handles the empty buffer without error", () => {
    expect(autoScale([])).toEqual({ min: 0, max: 1 });
  });

  it("pads the range and maps values into canvas coordinates", () => {
    const scale = autoScale([80, 90], 0.1);
    expect(scale.min).toBeCloseTo(79);
    expect(scale.max).toBeCloseTo(91);
    expect(toY(scale.max, scale, 100)).toBeCloseTo(0);
    expect(toY(scale.min, scale, 100)).toBeCloseTo(100);
  });
});

describe("rolling buffer", () => {
  it("enforces the 1000-point cap", () => {
    const buffer = new RollingBuffer();
    for (let i = 0; i < BUFFER_CAP + 250; i++) {
      buffer.push({ step: i, trueTemp: 85, predTemp: 85, setpoint: 86,
                    speed: 7, flow: 1.2 });
    }
    expect(buffer.length).toBe(BUFFER_CAP);
    expect(buffer.all()[0].step).toBe(250);
  });
});
