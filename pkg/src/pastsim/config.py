"""Run configuration: sectioned key=value files with strict validation.

The format is plain structured text: ``[section]`` headers, ``key = value``
lines, ``#`` comments. Unknown sections or keys are rejected with the line
number so the CLI can exit with a usable diagnostic. Every field has a
default that reproduces the reference setup: a 637 x 65 belt imaged over
72 to 212 degF, speed bounds [2, 12], tuning box [0.1, 0.1, 0.01] x
[50, 50, 50] with kappa 2.6, and controller gains (47.0, 15.3, 0.0234).

``RunConfig`` hands each subsystem its own config object (SimSetup,
ControllerConfig, TunerConfig, TrainConfig, EpisodeRandomization).
"""

import math
from dataclasses import dataclass, field as dc_field, replace

from .control import ControllerConfig
from .errors import ConfigError
from .field import CoolingConfig, spaced_cooling_regions
from .imaging import EpisodeRandomization
from .neural.training import TrainConfig
from .process import ClogModel, ProcessConfig, SimSetup, load_clog_table
from .tuning import TunerConfig

# section -> key -> default. Types are inferred from the defaults; -1 means
# "auto" for the keys documented below.
SCHEMA = {
    "process": {
        "shell_speed": 2.0 * math.pi / 16.0,
        "rows_on_shell": 4,
        "nozzles_per_row": 8,
        "deposit_temp": 90.0,
        "belt_width": 65,
        "belt_length": 637,
        "pastille_footprint": 2,
        "deposit_offset": 3,
    },
    "field": {
        "alpha": 0.002,
        "dt": 1.0,
        "u_inf": 72.0,
        "solver": "auto",
    },
    "cooling": {
        "rows": 3,
        "jets_per_row": 4,
        "water_rate": 18.0,
        "water_temp": 72.0,
        "region_length": 190,
        "region_start": 24,
        "region_end": 630,         # -1: three quarters down the belt
        "belt_thickness": 1.0,
        "belt_density": 2.0,
        "cp_water": 1.0,
        "cp_belt": 1.0,
    },
    "clog": {
        "persistence": 3.0,
        "beta_a": 2.0,
        "beta_b": 8.0,
        "u_max": 212.0,
        "temperature_driven": False,
        "empirical_table": "",
    },
    "imaging": {
        "t_lo": 72.0,
        "t_hi": 212.0,
        "frames_per_episode": 4,
        "sample_stride": 12,
        "warmup_steps": -1,        # -1: one belt length of steps
        "dimension_jitter": 0.0,
        "speed_min": 2.0,
        "speed_max": 12.0,
        "min_span": 0.5,
        "max_span": 3.0,
        "walk_sigma": 0.03,
        "speed_jump_min": 0,
        "speed_jump_max": 0,
        "cooling_scale_min": 0.5,
        "cooling_scale_max": 1.4,
        "persistence_min": 1.0,
        "persistence_max": 10.0,
        "propensity_scale_min": 0.45,
        "propensity_scale_max": 1.6,
        "deposit_temp_min": 86.0,
        "deposit_temp_max": 102.0,
    },
    "controller": {
        "k_p": 47.0,
        "tau_i": 15.3,
        "tau_d": 0.0234,
        "setpoint": 90.0,
        "rate_limit": 1.0,
        "speed_min": 2.0,
        "speed_max": 12.0,
        "initial_speed": 7.0,
    },
    "tuner": {
        "bounds_lo": [0.1, 0.1, 0.01],
        "bounds_hi": [50.0, 50.0, 50.0],
        "kappa": 2.6,
        "partitions": 3,
        "iterations_per_partition": 10,
        "budget": -1,              # -1: partitions * iterations_per_partition
        "noise_var": 1e-4,
        "lengthscale": 0.2,
        "objective_steps": 400,
        "setpoint": 90.0,
    },
    "training": {
        "batch_size": 32,
        "learning_rate": 0.001,
        "width": 64,
        "epochs": 200,
        "patience": 10,
        "val_fraction": 0.2,
        "augment_mirror": True,
        "lr_warmup_batches": 100,
        "flow_scale": -1.0,        # -1: nozzles_per_row
    },
    "simulate": {
        "speed": 7.0,
    },
}


def _parse_value(text, default, path, lineno, key):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if isinstance(default, int) and not isinstance(default, bool):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            body = text.strip("[]")
            return [float(v) for v in body.split(",") if v.strip()]
        return text
    except ValueError as err:
        raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {err}",
                          line=lineno, key=key) from err


def parse_config_file(path):
    """Parse a sectioned key=value file against the schema."""
    values = {section: dict(keys) for section, keys in SCHEMA.items()}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err

    section = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]",
                                  line=lineno, key=section)
            continue
        sep = "=" if "=" in line else (":" if ":" in line else None)
        if sep is None or section is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value' inside a "
                              f"section, got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition(sep)
        key = key.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in "
                              f"[{section}]", line=lineno, key=key)
        values[section][key] = _parse_value(value, SCHEMA[section][key],
                                            path, lineno, key)
    return values


@dataclass
class RunConfig:
    """Parsed configuration; hands each subsystem its config object."""

    values: dict = dc_field(default_factory=lambda: {
        section: dict(keys) for section, keys in SCHEMA.items()})

    @classmethod
    def default(cls) -> "RunConfig":
        return cls()

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls(values=parse_config_file(path))

    def __getitem__(self, section):
        return self.values[section]

    def process_config(self) -> ProcessConfig:
        p = self["process"]
        c = self["controller"]
        return ProcessConfig(
            shell_speed=p["shell_speed"], rows_on_shell=p["rows_on_shell"],
            nozzles_per_row=p["nozzles_per_row"], deposit_temp=p["deposit_temp"],
            belt_width=p["belt_width"], belt_length=p["belt_length"],
            speed_bounds=(c["speed_min"], c["speed_max"]),
            pastille_footprint=p["pastille_footprint"],
            deposit_offset=p["deposit_offset"])

    def cooling_config(self) -> CoolingConfig:
        c = self["cooling"]
        nx = self["process"]["belt_width"]
        ny = self["process"]["belt_length"]
        end = c["region_end"] if c["region_end"] > 0 else (3 * ny) // 4
        regions = spaced_cooling_regions(nx, ny, rows=c["rows"],
                                         length=c["region_length"],
                                         j_start=c["region_start"], j_end=end)
        return CoolingConfig(
            rows=c["rows"], jets_per_row=c["jets_per_row"],
            water_rate=c["water_rate"], wetted_regions=regions,
            water_temp=c["water_temp"], belt_thickness=c["belt_thickness"],
            belt_density=c["belt_density"], cp_water=c["cp_water"],
            cp_belt=c["cp_belt"])

    def clog_model(self) -> ClogModel:
        c = self["clog"]
        table = None
        if c["empirical_table"]:
            table = load_clog_table(c["empirical_table"])
        return ClogModel(base_propensity=None, persistence=c["persistence"],
                         empirical_table=table, u_max=c["u_max"],
                         temperature_driven=c["temperature_driven"],
                         beta_a=c["beta_a"], beta_b=c["beta_b"])

    def setup(self) -> SimSetup:
        f = self["field"]
        return SimSetup(process=self.process_config(),
                        cooling=self.cooling_config(), clog=self.clog_model(),
                        alpha=f["alpha"], dt=f["dt"], u_inf=f["u_inf"],
                        solver=f["solver"],
                        initial_speed=self["controller"]["initial_speed"])

    def controller_config(self, setpoint=None, gains=None) -> ControllerConfig:
        c = self["controller"]
        k_p, tau_i, tau_d = gains if gains is not None else (
            c["k_p"], c["tau_i"], c["tau_d"])
        return ControllerConfig(
            k_p=k_p, tau_i=tau_i, tau_d=tau_d,
            setpoint=setpoint if setpoint is not None else c["setpoint"],
            dt=self["field"]["dt"], rate_limit=c["rate_limit"],
            speed_bounds=(c["speed_min"], c["speed_max"]))

    def tuner_config(self, seed=0, budget=None, kappa=None) -> TunerConfig:
        t = self["tuner"]
        resolved = budget if budget is not None else (
            None if t["budget"] < 0 else t["budget"])
        return TunerConfig(
            bounds_lo=tuple(t["bounds_lo"]), bounds_hi=tuple(t["bounds_hi"]),
            kappa=kappa if kappa is not None else t["kappa"],
            partitions=t["partitions"],
            iterations_per_partition=t["iterations_per_partition"],
            budget=resolved, noise_var=t["noise_var"],
            lengthscale=t["lengthscale"], seed=seed)

    def randomization(self) -> EpisodeRandomization:
        i = self["imaging"]
        warmup = None if i["warmup_steps"] < 0 else i["warmup_steps"]
        return EpisodeRandomization(
            speed_min=i["speed_min"], speed_max=i["speed_max"],
            min_span=i["min_span"], max_span=i["max_span"],
            walk_sigma=i["walk_sigma"],
            speed_jump_min=i["speed_jump_min"],
            speed_jump_max=i["speed_jump_max"],
            cooling_scale_min=i["cooling_scale_min"],
            cooling_scale_max=i["cooling_scale_max"],
            persistence_min=i["persistence_min"],
            persistence_max=i["persistence_max"],
            propensity_scale_min=i["propensity_scale_min"],
            propensity_scale_max=i["propensity_scale_max"],
            deposit_temp_min=i["deposit_temp_min"],
            deposit_temp_max=i["deposit_temp_max"],
            frames_per_episode=i["frames_per_episode"],
            sample_stride=i["sample_stride"], warmup_steps=warmup,
            dimension_jitter=i["dimension_jitter"])

    def train_config(self, **overrides) -> TrainConfig:
        t = dict(self["training"])
        flow_scale = t.pop("flow_scale")
        if flow_scale is not None and flow_scale < 0:
            flow_scale = float(self["process"]["nozzles_per_row"])
        cfg = TrainConfig(flow_scale=flow_scale, **t)
        return replace(cfg, **overrides) if overrides else cfg

    def scale(self):
        return self["imaging"]["t_lo"], self["imaging"]["t_hi"]


def default_setup() -> SimSetup:
    """The reference simulator at its documented defaults."""
    return RunConfig.default().setup()


def write_example_config(path):
    """Write a fully commented config file holding every default."""
    notes = {
        "process": "rotating shell and belt geometry (cells, degF, rad/step)",
        "field": "heat-equation parameters; solver: auto | dst | cg | dense",
        "cooling": "underside water jets; region_end -1 = 3/4 down the belt",
        "clog": "per-nozzle clog propensities; empirical_table: optional file",
        "imaging": "frame scale plus per-episode randomization draws",
        "controller": "velocity-form PID gains, clamps, and setpoint",
        "tuner": "BO search box and acquisition settings",
        "training": "soft-sensor fit; flow_scale -1 = nozzles_per_row",
        "simulate": "open-loop run settings",
    }
    with open(path, "w") as fh:
        fh.write("# pastsim run configuration - every value is the default\n")
        for section, keys in SCHEMA.items():
            fh.write(f"\n[{section}]  # {notes[section]}\n")
            for key, default in keys.items():
                if isinstance(default, list):
                    value = "[" + ", ".join(repr(v) for v in default) + "]"
                elif isinstance(default, bool):
                    value = "true" if default else "false"
                elif isinstance(default, str):
                    value = default
                else:
                    value = repr(default)
                fh.write(f"{key} = {value}\n")
