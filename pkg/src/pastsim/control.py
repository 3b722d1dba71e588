"""Velocity-form PID speed control with rate and range clamps.

Each step the sensor reads the leading-row temperature U_n, the error
e_n = setpoint - U_n enters a three-error window, and the speed increment

    ds = K_P (e_n - e_{n-1} + (dt / tau_I) e_n + tau_D (e_n - 2 e_{n-1} + e_{n-2}) / dt)

is clamped to [-1, 1] before the speed itself is clamped to [2, 12]. The
velocity form keeps no integral accumulator, so clamping cannot wind up.
On an empty belt the sensor has nothing to measure: the previous speed is
held and the error history is left untouched.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NoLeadingRowError
from .imaging import render_frame
from .neural.model import SensorModel, forward
from .process import SimSetup, leading_row_temp, simulate_step

TRAJ_CSV_COLUMNS = ("step", "u_true", "u_pred", "error", "speed", "flow_rate")


@dataclass
class ControllerConfig:
    k_p: float = 47.0
    tau_i: float = 15.3
    tau_d: float = 0.0234
    setpoint: float = 90.0
    dt: float = 1.0
    rate_limit: float = 1.0
    speed_bounds: tuple = (2.0, 12.0)

    def __post_init__(self):
        if self.tau_i <= 0:
            raise InvalidParameterError("integral time tau_i must be positive")
        if self.tau_d < 0:
            raise InvalidParameterError("derivative time tau_d must be >= 0")
        if self.rate_limit <= 0 or self.dt <= 0:
            raise InvalidParameterError("rate limit and dt must be positive")
        lo, hi = self.speed_bounds
        if not lo < hi:
            raise InvalidParameterError("speed bounds must be ordered")


def pid_delta(errors, cfg: ControllerConfig) -> float:
    """Unclamped speed increment from the three most recent errors."""
    if cfg.tau_i <= 0:
        raise InvalidParameterError("integral time tau_i must be positive")
    e_n, e_1, e_2 = errors
    return cfg.k_p * (e_n - e_1 + (cfg.dt / cfg.tau_i) * e_n
                      + cfg.tau_d * (e_n - 2.0 * e_1 + e_2) / cfg.dt)


def apply_limits(s_prev, delta, cfg: ControllerConfig = None) -> float:
    """Clamp the increment to the rate limit, then the speed to its range."""
    cfg = cfg if cfg is not None else ControllerConfig()
    rate = cfg.rate_limit
    lo, hi = cfg.speed_bounds
    delta = min(max(delta, -rate), rate)
    return min(max(s_prev + delta, lo), hi)


class OracleSensor:
    """Reads the true leading-row temperature straight from the state."""

    name = "oracle"

    def read(self, state) -> float:
        return leading_row_temp(state)


class PanetSensor:
    """Runs a trained soft sensor on the rendered frame."""

    def __init__(self, model: SensorModel):
        self.model = model
        self.name = f"panet-{model.arch}"
        self.last_prediction = None

    def read(self, state) -> float:
        scale = self.model.label_scale
        frame = render_frame(state.field, scale.t_lo, scale.t_hi)
        pred = forward(self.model, frame)
        self.last_prediction = scale.unscale(np.asarray(pred, dtype=np.float64))
        return float(self.last_prediction[0])


@dataclass
class Trajectory:
    """Closed-loop run record, one row per step."""

    step: np.ndarray
    u_true: np.ndarray
    u_pred: np.ndarray
    error: np.ndarray
    speed: np.ndarray
    flow_rate: np.ndarray
    setpoint: float = float("nan")
    first_exit_step: int = None

    def __len__(self):
        return len(self.step)

    def to_csv(self, path):
        with open(path, "w") as fh:
            exit_step = -1 if self.first_exit_step is None else self.first_exit_step
            fh.write(f"# first_exit_step={exit_step}\n")
            fh.write(f"# setpoint={self.setpoint!r}\n")
            fh.write(",".join(TRAJ_CSV_COLUMNS) + "\n")
            for i in range(len(self.step)):
                fh.write("%d,%r,%r,%r,%r,%r\n" % (
                    int(self.step[i]), float(self.u_true[i]),
                    float(self.u_pred[i]), float(self.error[i]),
                    float(self.speed[i]), float(self.flow_rate[i])))

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                elif line and not line.startswith("step,"):
                    rows.append([float(v) for v in line.split(",")])
        data = np.asarray(rows, dtype=np.float64).reshape(len(rows), 6)
        exit_step = int(meta.get("first_exit_step", -1))
        return cls(step=data[:, 0].astype(int), u_true=data[:, 1],
                   u_pred=data[:, 2], error=data[:, 3], speed=data[:, 4],
                   flow_rate=data[:, 5],
                   setpoint=float(meta.get("setpoint", "nan")),
                   first_exit_step=None if exit_step < 0 else exit_step)


class ClosedLoopDriver:
    """One measurement -> PID -> simulate step at a time.

    Shared by the offline runner and the live session service so both emit
    identical speed sequences for the same seed. Measurement and the speed
    decision happen before the step executes, so with the oracle sensor e_n
    is exactly setpoint - leading_row_temp of the pre-step state. When
    ``control_enabled`` is False (manual mode) the current speed is held and
    the error history is left untouched.
    """

    def __init__(self, setup: SimSetup, sensor, cfg: ControllerConfig,
                 seed=0, initial_speed=None):
        self.setup = setup
        self.sensor = sensor
        self.cfg = cfg
        self.state = setup.build(seed=seed)
        s = float(initial_speed if initial_speed is not None
                  else setup.initial_speed)
        lo, hi = cfg.speed_bounds
        self.speed = min(max(s, lo), hi)
        self.e_1 = 0.0
        self.e_2 = 0.0

    def reset_history(self):
        self.e_1 = self.e_2 = 0.0

    def step(self, control_enabled=True) -> dict:
        try:
            u_true = leading_row_temp(self.state)
        except NoLeadingRowError:
            u_true = float("nan")
        try:
            u_n = self.sensor.read(self.state)
        except NoLeadingRowError:
            u_n = float("nan")
        e_n = float("nan")
        if control_enabled and np.isfinite(u_n):
            e_n = self.cfg.setpoint - u_n
            self.speed = apply_limits(
                self.speed, pid_delta((e_n, self.e_1, self.e_2), self.cfg),
                self.cfg)
            self.e_2, self.e_1 = self.e_1, e_n
        report = simulate_step(self.state, self.speed)
        return {
            "step": report.step, "u_true": u_true, "u_pred": u_n,
            "error": e_n, "speed": self.speed, "flow_rate": report.flow_rate,
            "theta": report.theta, "exited": report.exited,
        }


def run_closed_loop(setup: SimSetup, sensor, cfg: ControllerConfig, steps: int,
                    seed=0, initial_speed=None) -> Trajectory:
    """Run the closed loop for ``steps`` steps and record the trajectory."""
    if steps < 1:
        raise InvalidParameterError("closed loop needs at least one step")
    driver = ClosedLoopDriver(setup, sensor, cfg, seed=seed,
                              initial_speed=initial_speed)
    cols = {name: np.empty(steps) for name in
            ("u_true", "u_pred", "error", "speed", "flow_rate")}
    for n in range(steps):
        row = driver.step()
        for name in cols:
            cols[name][n] = row[name]
    return Trajectory(step=np.arange(steps), setpoint=cfg.setpoint,
                      first_exit_step=driver.state.first_row_exit_step, **cols)
