import { describe, expect, it } from "vitest";

import { FrameMsg } from "../src/protocol.js";
import {
  applyMessage, controlsEnabled, initialState, onClose, onOpen, sliderEnabled,
} from "../src/state.js";

function frame(step: number, overrides: Partial<FrameMsg> = {}): FrameMsg {
  return {
    type: "frame", step, mode: "auto", speed: 7.0, setpoint: 90,
    sensor_reading: 85.0, true_leading_temp: 85.1, flow_rate: 1.2,
    theta: 100, exited: 0, leading_row_pixel: 400, ny: 637, nx: 65,
    ...overrides,
  };
}

describe("console state", () => {
  it("mirrors the server-acknowledged mode, not the requested one", () => {
    const state = initialState();
    onOpen(state);
    applyMessage(state, frame(1, { mode: "auto" }));
    expect(state.mode).toBe("auto");
    // user asked for manual, but until a frame echoes it the mirror holds
    applyMessage(state, frame(2, { mode: "auto" }));
    expect(state.mode).toBe("auto");
    applyMessage(state, frame(3, { mode: "manual" }));
    expect(state.mode).toBe("manual");
  });

  it("snaps the displayed speed to the clamped server echo", () => {
    const state = initialState();
    onOpen(state);
    applyMessage(state, frame(1, { mode: "manual", speed: 12.0 }));
    // a slider request of 15 came back as 12 (the speed cap)
    expect(state.speed).toBe(12.0);
  });

  it("disables the slider in auto mode and everything when disconnected", () => {
    const state = initialState();
    onOpen(state);
    applyMessage(state, frame(1, { mode: "auto" }));
    expect(sliderEnabled(state)).toBe(false);
    applyMessage(state, frame(2, { mode: "manual" }));
    expect(sliderEnabled(state)).toBe(true);
    onClose(state);
    expect(sliderEnabled(state)).toBe(false);
    expect(controlsEnabled(state)).toBe(false);
  });

  it("collects error messages as toasts", () => {
    const state = initialState();
    onOpen(state);
    applyMessage(state, { type: "error", step: 4, message: "nope" });
    expect(state.toasts).toEqual(["nope"]);
  });

  it("keeps the trend buffer bounded at 1000 points", () => {
    const state = initialState();
    onOpen(state);
    for (let i = 0; i < 1400; i++) {
      applyMessage(state, frame(i));
    }
    expect(state.buffer.length).toBe(1000);
    expect(state.buffer.all()[0].step).toBe(400);
  });

  it("restarts the buffer when the step counter resets", () => {
    const state = initialState();
    onOpen(state);
    for (let i = 0; i < 50; i++) {
      applyMessage(state, frame(i));
    }
    applyMessage(state, frame(0));   // server handled a reset command
    expect(state.buffer.length).toBe(1);
  });
});
