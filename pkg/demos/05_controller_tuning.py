"""Bayesian-optimization controller tuning, desk scale.

Runs the partitioned GP/LCB search on a shortened horizon so the demo takes
about a minute, then prints the incumbent path. The full-scale recipe
(T=400 on the reference config, budget 30) is the `pastsim tune` default.
"""

import numpy as np

from pastsim.config import RunConfig
from pastsim.tuning import tune

cfg = RunConfig.default()

# shorter belt -> shorter objective horizon -> fast demo
cfg["process"]["belt_length"] = 160
cfg["cooling"]["region_start"] = 10
cfg["cooling"]["region_end"] = 155
cfg["cooling"]["region_length"] = 45

tuner = cfg.tuner_config(seed=1, budget=12)
print(f"search box {tuner.bounds_lo} .. {tuner.bounds_hi}, kappa {tuner.kappa}, "
      f"budget {tuner.budget} (3 seeds + 9 proposals, partitions rotating)\n")

result = tune(tuner, setup=cfg.setup(), steps=200, setpoint=90.0)

print("iter  part        K_P     tau_I     tau_D   objective   incumbent")
for rec in result.history:
    print(f"{rec.iteration:4d}  {rec.partition:4d}  {rec.params[0]:9.3f} "
          f"{rec.params[1]:9.3f} {rec.params[2]:9.4f}  {rec.objective:10.2f} "
          f"{rec.incumbent:11.2f}")

k_p, tau_i, tau_d = result.best_params
print(f"\nbest gains: K_P={k_p:.3f}, tau_I={tau_i:.3f}, tau_D={tau_d:.4f} "
      f"(objective {result.best_objective:.2f})")
