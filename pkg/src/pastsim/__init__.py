"""pastsim: digital twin of a pastillation conveyor.

Simulates pastille deposition with stochastic nozzle clogs, the belt's 2D
thermal field under cooling-water jets, and an overhead thermal camera;
trains convolutional soft sensors on the rendered frames; closes the loop
with a clamped velocity-form PID; and tunes the controller gains with
Gaussian-process Bayesian optimization.
"""

from .config import RunConfig, default_setup
from .control import (ClosedLoopDriver, ControllerConfig, OracleSensor,
                      PanetSensor, Trajectory, apply_limits, pid_delta,
                      run_closed_loop)
from .field import (CoolingConfig, ThermalField, ambient_field, forcing_grid,
                    fourier_numbers, spaced_cooling_regions, step_implicit)
from .imaging import (EpisodeRandomization, Frame, generate_dataset,
                      iter_dataset, leading_row_temp, load_dataset_arrays,
                      read_dataset, render_frame, write_dataset)
from .process import (ClogModel, PastilleRow, ProcessConfig, SimSetup,
                      SimulationState, StepReport, advance_rows,
                      clog_probability, deposit_row, flow_rate, make_state,
                      run_open_loop, sample_deposit_mask, simulate_step)
from .tuning import (GpPosterior, Observation, TunerConfig, TuneResult,
                     gp_fit, gp_predict, matern15, objective, propose,
                     surface_grid, tune)

__version__ = "0.1.0"
