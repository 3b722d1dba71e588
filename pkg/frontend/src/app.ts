/**
 * Console wiring: websocket lifecycle, DOM controls, and render loop.
 * All state transitions go through state.ts; drawing happens on every
 * received frame (the stream paces us, not requestAnimationFrame).
 */

import { drawFlowChart, drawSpeedChart, drawTemperatureChart } from "./charts.js";
import { drawHeatmap } from "./heatmap.js";
import {
  injectClogCmd, parseServerMessage, pauseCmd, resetCmd, resumeCmd,
  setModeCmd, setSetpointCmd, setSpeedCmd,
} from "./protocol.js";
import {
  applyMessage, controlsEnabled, initialState, onClose, onOpen, sliderEnabled,
} from "./state.js";

const state = initialState();
let socket: WebSocket | null = null;

const $ = (id: string) => document.getElementById(id)!;
const heatmap = $("heatmap") as HTMLCanvasElement;
const tempChart = $("chart-temp") as HTMLCanvasElement;
const speedChart = $("chart-speed") as HTMLCanvasElement;
const flowChart = $("chart-flow") as HTMLCanvasElement;
const slider = $("speed-slider") as HTMLInputElement;
const sliderLabel = $("speed-label") as HTMLSpanElement;
const modeToggle = $("mode-toggle") as HTMLInputElement;
const setpointInput = $("setpoint") as HTMLInputElement;
const nozzleInput = $("clog-nozzle") as HTMLInputElement;
const durationInput = $("clog-duration") as HTMLInputElement;
const statusEl = $("status");
const readoutEl = $("readout");
const toastEl = $("toast");

function send(payload: string): void {
  if (socket && socket.readyState === WebSocket.OPEN) {
    socket.send(payload);
  }
}

function refreshControls(): void {
  const canCommand = controlsEnabled(state);
  slider.disabled = !sliderEnabled(state);
  modeToggle.disabled = !canCommand;
  setpointInput.disabled = !canCommand;
  ($("clog-send") as HTMLButtonElement).disabled = !canCommand;
  ($("pause") as HTMLButtonElement).disabled = !canCommand;
  ($("resume") as HTMLButtonElement).disabled = !canCommand;
  ($("reset") as HTMLButtonElement).disabled = !canCommand;
  modeToggle.checked = state.mode === "auto";
  statusEl.textContent = state.connected
    ? `connected (${state.mode})` : "disconnected";
  statusEl.className = state.connected ? "ok" : "bad";
}

function refreshReadout(): void {
  const f = state.lastFrame;
  if (!f) {
    return;
  }
  const fmt = (v: number | null, digits = 2) =>
    v === null ? "--" : v.toFixed(digits);
  readoutEl.textContent =
    `step ${f.step}   speed ${f.speed.toFixed(2)}   ` +
    `T_true ${fmt(f.true_leading_temp)} degF   ` +
    `T_pred ${fmt(f.sensor_reading)} degF   ` +
    `flow ${f.flow_rate.toFixed(3)}/step   theta ${f.theta}`;
  if (!sliderDragging && sliderEnabled(state)) {
    slider.value = String(f.speed);
    sliderLabel.textContent = f.speed.toFixed(2);
  }
}

function toast(message: string): void {
  toastEl.textContent = message;
  toastEl.classList.add("visible");
  window.setTimeout(() => toastEl.classList.remove("visible"), 4000);
}

let sliderDragging = false;

function connect(): void {
  const url = `ws://${location.hostname}:${sessionPort()}/session`;
  socket = new WebSocket(url);
  socket.onopen = () => {
    onOpen(state);
    refreshControls();
  };
  socket.onclose = () => {
    onClose(state);
    refreshControls();
    window.setTimeout(connect, 1500);   // keep trying; the view rebuilds itself
  };
  socket.onmessage = (event) => {
    const toastsBefore = state.toasts.length;
    const msg = parseServerMessage(event.data as string);
    applyMessage(state, msg);
    if (state.toasts.length > toastsBefore) {
      toast(state.toasts[state.toasts.length - 1]);
    }
    if (msg.type === "frame") {
      drawHeatmap(heatmap, msg);
      const points = state.buffer.all();
      drawTemperatureChart(tempChart, points);
      drawSpeedChart(speedChart, points);
      drawFlowChart(flowChart, points);
      refreshReadout();
    }
    refreshControls();
  };
}

function sessionPort(): string {
  const params = new URLSearchParams(location.search);
  return params.get("port") ?? "8765";
}

modeToggle.addEventListener("change", () => {
  send(setModeCmd(modeToggle.checked ? "auto" : "manual"));
});

slider.addEventListener("pointerdown", () => { sliderDragging = true; });
slider.addEventListener("input", () => {
  sliderLabel.textContent = Number(slider.value).toFixed(2);
});
slider.addEventListener("change", () => {
  sliderDragging = false;
  send(setSpeedCmd(Number(slider.value)));   // server clamps; frame echo snaps us
});

setpointInput.addEventListener("change", () => {
  const value = Number(setpointInput.value);
  if (isFinite(value)) {
    send(setSetpointCmd(value));
  }
});

$("clog-send").addEventListener("click", () => {
  send(injectClogCmd(Number(nozzleInput.value), Number(durationInput.value)));
});
$("pause").addEventListener("click", () => send(pauseCmd()));
$("resume").addEventListener("click", () => send(resumeCmd()));
$("reset").addEventListener("click", () => send(resetCmd()));

refreshControls();
connect();
