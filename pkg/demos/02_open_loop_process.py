"""Open-loop pastillation runs at fixed belt speeds.

Shows the speed -> leading-row-temperature map that the controller later
exploits, plus the flow rate's insensitivity to speed at steady state
(deposition in equals deposition out) and the clog-driven fluctuations
around it.
"""

import numpy as np

from pastsim.config import default_setup
from pastsim.process import run_open_loop

setup = default_setup()
print(f"belt {setup.process.belt_width} x {setup.process.belt_length} cells, "
      f"{setup.process.nozzles_per_row} nozzles/row, "
      f"deposit every {setup.process.deposition_period(setup.dt)} steps\n")

print("speed   leading-row temp    flow rate      theta")
for speed in (2.0, 4.0, 6.0, 8.0, 10.0, 12.0):
    state = setup.build(seed=3)
    reports = run_open_loop(state, 700, speed)
    tail = reports[-80:]
    temps = np.array([r.leading_row_temp for r in tail])
    flows = np.array([r.flow_rate for r in tail])
    print(f"{speed:5.1f}   {np.nanmean(temps):6.2f} +- {np.nanstd(temps):4.2f} degF"
          f"   {flows.mean():5.3f} +- {flows.std():5.3f}   {tail[-1].theta:5d}")

state = setup.build(seed=3)
reports = run_open_loop(state, 200, 6.0)
deposited = sum(r.deposited for r in reports)
exited = sum(r.exited_pastilles for r in reports)
print(f"\nconservation over 200 steps at speed 6: deposited {deposited}, "
      f"exited {exited}, on belt {reports[-1].theta} "
      f"(= {deposited} - {exited})")
