/**
 * Console state: a pure reducer over server messages.
 *
 * The UI mode always mirrors the last server-acknowledged mode (the mode
 * field of the newest frame), never the locally requested one, so a
 * rejected command leaves the console truthful. Commands are only allowed
 * while connected.
 */

import { RollingBuffer } from "./buffer.js";
import { ErrorMsg, FrameMsg, HelloMsg, Mode, ServerMsg } from "./protocol.js";

export interface ConsoleState {
  connected: boolean;
  mode: Mode;
  setpoint: number;
  speed: number;
  lastFrame: FrameMsg | null;
  hello: HelloMsg | null;
  buffer: RollingBuffer;
  toasts: string[];
}

export function initialState(): ConsoleState {
  return {
    connected: false,
    mode: "auto",
    setpoint: NaN,
    speed: NaN,
    lastFrame: null,
    hello: null,
    buffer: new RollingBuffer(),
    toasts: [],
  };
}

export function onOpen(state: ConsoleState): void {
  state.connected = true;
}

export function onClose(state: ConsoleState): void {
  state.connected = false;
}

export function applyMessage(state: ConsoleState, msg: ServerMsg): void {
  if (msg.type === "hello") {
    state.hello = msg;
    state.mode = msg.mode;
    state.setpoint = msg.setpoint;
    return;
  }
  if (msg.type === "error") {
    state.toasts.push(msg.message);
    if (state.toasts.length > 5) {
      state.toasts.shift();
    }
    return;
  }
  const frame = msg as FrameMsg;
  state.lastFrame = frame;
  state.mode = frame.mode;          // server echo is the source of truth
  state.setpoint = frame.setpoint;
  state.speed = frame.speed;
  state.buffer.push({
    step: frame.step,
    trueTemp: frame.true_leading_temp,
    predTemp: frame.sensor_reading,
    setpoint: frame.setpoint,
    speed: frame.speed,
    flow: frame.flow_rate,
  });
}

/** Whether the manual speed slider is usable right now. */
export function sliderEnabled(state: ConsoleState): boolean {
  return state.connected && state.mode === "manual";
}

/** Whether any command control is usable right now. */
export function controlsEnabled(state: ConsoleState): boolean {
  return state.connected;
}
