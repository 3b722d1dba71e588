"""Closed-loop temperature control at three setpoints with the tuned gains.

Uses the exact-measurement oracle sensor so the demo runs without a trained
model; swap in PanetSensor(load_model(...)) to reproduce the soft-sensor
loop. Prints settling behaviour and writes one trajectory CSV per setpoint.
82 and 86 degF settle within about +-1.4 degF; 90 degF sits above the
default equipment's achievable band, so the speed rails at its upper bound
and holds the closest reachable temperature (~87.6 degF).
"""

import numpy as np

from pastsim.config import RunConfig
from pastsim.control import OracleSensor, run_closed_loop

cfg = RunConfig.default()
setup = cfg.setup()
gains = (47.0, 15.3, 0.0234)

for setpoint in (82.0, 86.0, 90.0):
    controller = cfg.controller_config(setpoint=setpoint, gains=gains)
    traj = run_closed_loop(setup, OracleSensor(), controller, steps=260, seed=0)
    window = traj.u_true[151:201]
    out = f"trajectory_sp{int(setpoint)}.csv"
    traj.to_csv(out)
    inside = np.nanmax(np.abs(window - setpoint))
    print(f"setpoint {setpoint:5.1f}: first row exits at step "
          f"{traj.first_exit_step}, trailing-window max deviation "
          f"{inside:4.2f} degF, speed ends at {traj.speed[-1]:4.1f}  -> {out}")

print("\nspeed trace for the 86 degF run (every 20 steps):")
traj = run_closed_loop(setup, OracleSensor(),
                       cfg.controller_config(setpoint=86.0, gains=gains),
                       steps=260, seed=0)
for k in range(0, 260, 20):
    print(f"  step {k:3d}  T {traj.u_true[k]:6.2f}  v {traj.speed[k]:5.2f}")
