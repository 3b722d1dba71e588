/**
 * Message schema of the /session websocket, mirrored from docs/protocol.md.
 * Parsing and command encoding are pure so they can be tested headlessly.
 */

export interface HelloMsg {
  type: "hello";
  step: number;
  ny: number;
  nx: number;
  downsample: number;
  t_lo: number;
  t_hi: number;
  mode: Mode;
  setpoint: number;
  tick_rate: number;
}

export interface FrameMsg {
  type: "frame";
  step: number;
  mode: Mode;
  speed: number;
  setpoint: number;
  sensor_reading: number | null;
  true_leading_temp: number | null;
  flow_rate: number;
  theta: number;
  exited: number;
  leading_row_pixel: number | null;
  ny: number;
  nx: number;
  pixels?: string;       // base64 little-endian f32, row-major
  pixel_ny?: number;
  pixel_nx?: number;
}

export interface ErrorMsg {
  type: "error";
  step: number;
  message: string;
}

export type Mode = "manual" | "auto";
export type ServerMsg = HelloMsg | FrameMsg | ErrorMsg;

export function parseServerMessage(raw: string): ServerMsg {
  const msg = JSON.parse(raw);
  if (msg === null || typeof msg !== "object" || typeof msg.type !== "string") {
    throw new Error("server message must be an object with a type");
  }
  if (msg.type !== "hello" && msg.type !== "frame" && msg.type !== "error") {
    throw new Error(`unknown message type ${msg.type}`);
  }
  if (typeof msg.step !== "number") {
    throw new Error("server message missing step");
  }
  return msg as ServerMsg;
}

/** Decode the base64 little-endian float32 pixel payload of a frame. */
export function decodePixels(frame: FrameMsg): Float32Array | null {
  if (!frame.pixels || frame.pixel_ny === undefined || frame.pixel_nx === undefined) {
    return null;
  }
  const binary = atob(frame.pixels);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  const out = new Float32Array(bytes.buffer);
  if (out.length !== frame.pixel_ny * frame.pixel_nx) {
    throw new Error(
      `pixel payload ${out.length} does not match ${frame.pixel_ny}x${frame.pixel_nx}`);
  }
  return out;
}

// -- command encoding --------------------------------------------------------

export function setModeCmd(mode: Mode): string {
  return JSON.stringify({ type: "cmd", cmd: "set_mode", mode });
}

export function setSpeedCmd(value: number): string {
  return JSON.stringify({ type: "cmd", cmd: "set_speed", value });
}

export function setSetpointCmd(value: number): string {
  return JSON.stringify({ type: "cmd", cmd: "set_setpoint", value });
}

export function injectClogCmd(nozzle: number, duration: number): string {
  return JSON.stringify({ type: "cmd", cmd: "inject_clog", nozzle, duration });
}

export function pauseCmd(): string {
  return JSON.stringify({ type: "cmd", cmd: "pause" });
}

export function resumeCmd(): string {
  return JSON.stringify({ type: "cmd", cmd: "resume" });
}

export function resetCmd(seed?: number): string {
  return seed === undefined
    ? JSON.stringify({ type: "cmd", cmd: "reset" })
    : JSON.stringify({ type: "cmd", cmd: "reset", seed });
}
