"""Live session service: one simulation streamed over a websocket.

Clients connect to ``/session`` (optionally ``/session?downsample=k``) and
receive newline-free JSON messages, one per simulation step:

    hello  -- first message: dims, scale, mode, setpoint, tick rate
    frame  -- step, mode, speed, setpoint, sensor_reading, true_leading_temp,
              flow_rate, theta, exited, and base64 little-endian f32 pixels
              (spatially downsampled by the negotiated factor; dropped, never
              delayed, for slow clients)
    error  -- a rejected or malformed command; the session continues

Commands are JSON objects {"type": "cmd", "cmd": ..., ...} applied at step
boundaries in arrival order: set_mode {mode}, set_speed {value} (manual
only, clamped to the speed bounds), set_setpoint {value}, inject_clog
{nozzle, duration}, pause, resume, reset {seed}. ``/healthz`` answers plain
"ok". In auto mode the emitted speed sequence matches an offline
run_closed_loop with the same seed; manual mode holds the commanded speed
and leaves the controller's error history untouched.
"""

import asyncio
import base64
import collections
import http
import json
import urllib.parse

import numpy as np
from websockets.asyncio.server import serve as ws_serve

from .control import ClosedLoopDriver, OracleSensor
from .errors import PastsimError
from .imaging import render_frame
from .process import leading_row_pixel

# Clients with more than this many queued messages stop receiving pixel
# payloads; far beyond it they are disconnected as unrecoverable.
PIXEL_BACKLOG_LIMIT = 8
DROP_CLIENT_LIMIT = 10_000


def _finite_or_none(value):
    return float(value) if np.isfinite(value) else None


class _Client:
    def __init__(self, connection, downsample):
        self.connection = connection
        self.downsample = downsample
        self.queue = collections.deque()
        self.wakeup = asyncio.Event()
        self.dead = False

    def enqueue(self, payload: dict, pixels_b64=None, shape=None):
        if len(self.queue) > DROP_CLIENT_LIMIT:
            self.dead = True
        message = dict(payload)
        if pixels_b64 is not None and len(self.queue) <= PIXEL_BACKLOG_LIMIT:
            message["pixels"] = pixels_b64
            message["pixel_ny"], message["pixel_nx"] = shape
        self.queue.append(json.dumps(message))
        self.wakeup.set()

    async def writer(self):
        while not self.dead:
            if not self.queue:
                self.wakeup.clear()
                await self.wakeup.wait()
                continue
            try:
                await self.connection.send(self.queue.popleft())
            except Exception:
                self.dead = True


class SessionServer:
    """One simulation loop, many watching clients, command queue in between."""

    def __init__(self, run_config, tick_rate=10.0, seed=0, sensor=None):
        self.run_config = run_config
        self.tick_rate = tick_rate
        self.seed = seed
        self.sensor = sensor if sensor is not None else OracleSensor()
        self.mode = "auto"
        self.paused = False
        self.commands = asyncio.Queue()
        self.clients = set()
        self.stop_event = asyncio.Event()
        self.t_lo, self.t_hi = run_config.scale()
        self._build_driver(seed)

    def _build_driver(self, seed):
        self.driver = ClosedLoopDriver(
            self.run_config.setup(), self.sensor,
            self.run_config.controller_config(), seed=seed)

    # -- command handling ---------------------------------------------------

    def handle_command(self, msg: dict):
        """Apply one client command; raises PastsimError on rejection."""
        cmd = msg.get("cmd")
        if cmd == "set_mode":
            mode = msg.get("mode")
            if mode not in ("manual", "auto"):
                raise PastsimError(f"unknown mode {mode!r}")
            if mode == "auto" and self.mode != "auto":
                self.driver.reset_history()
            self.mode = mode
        elif cmd == "set_speed":
            if self.mode != "manual":
                raise PastsimError("set_speed is only accepted in manual mode")
            lo, hi = self.driver.cfg.speed_bounds
            self.driver.speed = min(max(float(msg["value"]), lo), hi)
        elif cmd == "set_setpoint":
            self.driver.cfg.setpoint = float(msg["value"])
        elif cmd == "inject_clog":
            nozzle = int(msg["nozzle"])
            duration = int(msg["duration"])
            remaining = self.driver.state.clog_remaining
            if not 0 <= nozzle < len(remaining) or duration < 1:
                raise PastsimError("inject_clog needs a valid nozzle and duration >= 1")
            remaining[nozzle] = max(remaining[nozzle], duration)
        elif cmd == "pause":
            self.paused = True
        elif cmd == "resume":
            self.paused = False
        elif cmd == "reset":
            self._build_driver(int(msg.get("seed", self.seed)))
            self.paused = False
        else:
            raise PastsimError(f"unknown command {cmd!r}")

    def _drain_commands(self):
        while True:
            try:
                msg = self.commands.get_nowait()
            except asyncio.QueueEmpty:
                return
            try:
                self.handle_command(msg)
            except (PastsimError, KeyError, TypeError, ValueError) as err:
                self._broadcast({"type": "error",
                                 "step": self.driver.state.step_count,
                                 "message": str(err)})

    # -- frame emission -----------------------------------------------------

    def _broadcast(self, payload, pixels=None):
        doomed = []
        encoded = None
        shape = None
        for client in self.clients:
            if client.dead:
                doomed.append(client)
                continue
            if pixels is not None:
                view = pixels[::client.downsample, ::client.downsample]
                encoded = base64.b64encode(
                    np.ascontiguousarray(view, dtype="<f4").tobytes()).decode()
                shape = view.shape
                client.enqueue(payload, encoded, shape)
            else:
                client.enqueue(payload)
        for client in doomed:
            self.clients.discard(client)

    def _emit_step(self):
        row = self.driver.step(control_enabled=(self.mode == "auto"))
        pixels = render_frame(self.driver.state.field, self.t_lo, self.t_hi)
        self._broadcast({
            "type": "frame",
            "step": row["step"],
            "mode": self.mode,
            "speed": row["speed"],
            "setpoint": self.driver.cfg.setpoint,
            "sensor_reading": _finite_or_none(row["u_pred"]),
            "true_leading_temp": _finite_or_none(row["u_true"]),
            "flow_rate": row["flow_rate"],
            "theta": row["theta"],
            "exited": row["exited"],
            "leading_row_pixel": leading_row_pixel(self.driver.state),
            "ny": pixels.shape[0],
            "nx": pixels.shape[1],
        }, pixels=pixels)

    async def sim_loop(self):
        try:
            while not self.stop_event.is_set():
                self._drain_commands()
                if not self.paused:
                    self._emit_step()
                if self.tick_rate > 0:
                    await asyncio.sleep(1.0 / self.tick_rate)
                else:
                    await asyncio.sleep(0)
        except asyncio.CancelledError:
            pass

    # -- connection handling --------------------------------------------------

    async def handle_connection(self, connection):
        path = connection.request.path
        parsed = urllib.parse.urlparse(path)
        if parsed.path != "/session":
            await connection.close(code=4004, reason="connect to /session")
            return
        query = urllib.parse.parse_qs(parsed.query)
        try:
            downsample = max(1, int(query.get("downsample", ["1"])[0]))
        except ValueError:
            downsample = 1
        client = _Client(connection, downsample)
        self.clients.add(client)
        writer = asyncio.ensure_future(client.writer())
        client.enqueue({
            "type": "hello",
            "step": self.driver.state.step_count,
            "ny": self.driver.state.field.ny,
            "nx": self.driver.state.field.nx,
            "downsample": downsample,
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "mode": self.mode,
            "setpoint": self.driver.cfg.setpoint,
            "tick_rate": self.tick_rate,
        })
        try:
            async for raw in connection:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict) or msg.get("type") != "cmd":
                        raise ValueError("commands are objects with type='cmd'")
                except ValueError as err:
                    client.enqueue({"type": "error",
                                    "step": self.driver.state.step_count,
                                    "message": f"malformed command: {err}"})
                    continue
                await self.commands.put(msg)
        finally:
            client.dead = True
            client.wakeup.set()
            self.clients.discard(client)
            writer.cancel()

    @staticmethod
    def healthz(connection, request):
        if request.path == "/healthz":
            return connection.respond(http.HTTPStatus.OK, "ok\n")
        return None


async def serve_async(run_config, port=8765, host="127.0.0.1", tick_rate=10.0,
                      seed=0, sensor=None, started=None):
    """Run the session service until cancelled.

    ``started``, when given, is an asyncio.Future that receives the
    (server, actual_port) pair once listening; tests use it with port=0.
    """
    session = SessionServer(run_config, tick_rate=tick_rate, seed=seed,
                            sensor=sensor)
    async with ws_serve(session.handle_connection, host, port,
                        process_request=SessionServer.healthz) as server:
        actual_port = server.sockets[0].getsockname()[1] if server.sockets else port
        if started is not None:
            started.set_result((session, actual_port))
        loop_task = asyncio.ensure_future(session.sim_loop())
        try:
            await session.stop_event.wait()
        finally:
            loop_task.cancel()


def serve(run_config, port=8765, host="127.0.0.1", tick_rate=10.0, seed=0,
          sensor=None):
    """Blocking entry point used by the CLI; Ctrl-C stops the service."""
    try:
        asyncio.run(serve_async(run_config, port=port, host=host,
                                tick_rate=tick_rate, seed=seed, sensor=sensor))
    except KeyboardInterrupt:
        pass
