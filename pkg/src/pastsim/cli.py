"""Command-line surface.

Subcommands: simulate, gen-dataset, train, cv, saliency, closed-loop, tune,
surface, serve, example-config. Every command validates its configuration
before any side effect and is deterministic given --seed. Exit codes:
0 success, 2 usage or configuration problem, 3 runtime failure.
"""

import argparse
import sys

import numpy as np

from . import bridge
from .config import RunConfig, write_example_config
from .control import OracleSensor, PanetSensor, run_closed_loop
from .errors import (ConfigError, FormatError, InvalidParameterError,
                     PastsimError)
from .imaging import generate_dataset, load_dataset_arrays
from .neural import (cross_validate, load_model, save_model, smoothgrad,
                     train, write_history_csv)
from .neural.training import BATCH_GRID, LR_GRID, WIDTH_GRID
from .process import run_open_loop, write_step_reports_csv
from .tuning import surface_grid, tune
from .tuning import write_history_csv as write_tune_csv


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return RunConfig.load(args.config)
    return RunConfig.default()


def _sensor_from_arg(value, run_cfg):
    if value == "oracle":
        return OracleSensor()
    return PanetSensor(load_model(value))


def cmd_simulate(args):
    cfg = _load_config(args)
    setup = cfg.setup()
    speed = args.speed if args.speed is not None else cfg["simulate"]["speed"]
    lo, hi = setup.process.speed_bounds
    if not lo <= speed <= hi:
        raise ConfigError(f"open-loop speed {speed} outside bounds [{lo}, {hi}]")
    if args.steps < 0:
        raise ConfigError(f"--steps must be >= 0, got {args.steps}")
    state = setup.build(seed=args.seed)
    reports = run_open_loop(state, args.steps, speed)
    write_step_reports_csv(args.out, reports)
    return 0


def cmd_gen_dataset(args):
    cfg = _load_config(args)
    if args.frames < 1:
        raise ConfigError(f"--frames must be >= 1, got {args.frames}")
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    t_lo, t_hi = cfg.scale()
    generate_dataset(cfg.setup(), cfg.randomization(), n_frames=args.frames,
                     seed=args.seed, path=args.out, t_lo=t_lo, t_hi=t_hi,
                     jobs=args.jobs)
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    overrides = {"seed": args.seed}
    if args.batch is not None:
        overrides["batch_size"] = args.batch
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.width is not None:
        overrides["width"] = args.width
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    train_cfg = cfg.train_config(**overrides)
    t_lo, t_hi = cfg.scale()
    header, pixels, labels = load_dataset_arrays(args.data)
    result = train((pixels, labels), args.arch, train_cfg,
                   t_lo=header.t_lo, t_hi=header.t_hi)
    save_model(args.out, result.model)
    if args.history:
        write_history_csv(args.history, result.history)
    best = result.history[result.best_epoch]
    print(f"best epoch {result.best_epoch}: val RMSE "
          f"{best.val_rmse_temp:.4f} degF / {best.val_rmse_flow:.4f} per-step")
    return 0


def _parse_grid_list(text, kind):
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise ConfigError(f"bad grid list {text!r}: {err}") from err


def cmd_cv(args):
    cfg = _load_config(args)
    grid = {
        "batch_size": _parse_grid_list(args.batch, int),
        "learning_rate": _parse_grid_list(args.lr, float),
        "width": _parse_grid_list(args.width, int),
    }
    base = cfg.train_config(seed=args.seed)
    if args.epochs is not None:
        base = cfg.train_config(seed=args.seed, epochs=args.epochs)
    header, pixels, labels = load_dataset_arrays(args.data)
    report = cross_validate((pixels, labels), args.arch, grid=grid,
                            base_config=base, folds=args.folds,
                            t_lo=header.t_lo, t_hi=header.t_hi)
    report.to_csv(args.out)
    for key, (mean, std) in report.summary().items():
        print(f"{key}: {mean:.4f} +- {std:.4f}")
    return 0


def cmd_saliency(args):
    model = load_model(args.model)
    header, pixels, labels = load_dataset_arrays(args.data)
    if not 0 <= args.index < header.count:
        raise ConfigError(f"--index {args.index} outside dataset of {header.count}")
    x = pixels[args.index]
    y = model.label_scale.scale(labels[args.index])
    sal = smoothgrad(model, x, y, m_samples=args.m_samples, sigma=args.sigma,
                     seed=args.seed)
    with open(args.out, "w") as fh:
        for row in sal:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return 0


def cmd_closed_loop(args):
    cfg = _load_config(args)
    gains = None
    if args.gains:
        parts = _parse_grid_list(args.gains, float)
        if len(parts) != 3:
            raise ConfigError(f"--gains expects KP,TI,TD, got {args.gains!r}")
        gains = tuple(parts)
    controller = cfg.controller_config(setpoint=args.setpoint, gains=gains)
    sensor = _sensor_from_arg(args.sensor, cfg)
    traj = run_closed_loop(cfg.setup(), sensor, controller, steps=args.steps,
                           seed=args.seed, initial_speed=args.initial_speed)
    traj.to_csv(args.out)
    return 0


def cmd_tune(args):
    cfg = _load_config(args)
    tuner = cfg.tuner_config(seed=args.seed, budget=args.budget,
                             kappa=args.kappa)
    sensor = _sensor_from_arg(args.sensor, cfg)
    steps = args.steps if args.steps is not None else cfg["tuner"]["objective_steps"]
    setpoint = cfg["tuner"]["setpoint"]
    result = tune(tuner, setup=cfg.setup(), steps=steps, setpoint=setpoint,
                  sensor=sensor)
    write_tune_csv(args.out, result.history)
    k_p, tau_i, tau_d = result.best_params
    print(f"best params: K_P={k_p:.4f} tau_I={tau_i:.4f} tau_D={tau_d:.4f} "
          f"objective={result.best_objective:.4f}")
    return 0


def cmd_surface(args):
    cfg = _load_config(args)
    try:
        n_kp, n_ti = (int(v) for v in args.grid.lower().split("x"))
    except ValueError as err:
        raise ConfigError(f"--grid expects NxM, got {args.grid!r}") from err
    tuner = cfg.tuner_config()
    sensor = _sensor_from_arg(args.sensor, cfg)
    steps = args.steps if args.steps is not None else cfg["tuner"]["objective_steps"]
    rows = surface_grid(cfg.setup(), tuner, n_kp=n_kp, n_ti=n_ti,
                        tau_d=args.tau_d, steps=steps, seed=args.seed,
                        setpoint=cfg["tuner"]["setpoint"], sensor=sensor)
    with open(args.out, "w") as fh:
        fh.write("k_p,tau_i,objective\n")
        for k_p, tau_i, j in rows:
            fh.write("%r,%r,%r\n" % (k_p, tau_i, j))
    return 0


def cmd_serve(args):
    cfg = _load_config(args)
    sensor = _sensor_from_arg(args.sensor, cfg) if args.sensor else None
    bridge.serve(cfg, port=args.port, host=args.host,
                 tick_rate=args.tick_rate, seed=args.seed, sensor=sensor)
    return 0


def cmd_example_config(args):
    write_example_config(args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pastsim",
        description="Pastillation digital twin: simulate, image, train soft "
                    "sensors, close the loop, and tune the controller.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, helptext):
        p = sub.add_parser(name, help=helptext)
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "open-loop run at fixed speed -> CSV")
    p.add_argument("--config")
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speed", type=float, default=None)
    p.add_argument("--out", required=True)

    p = add("gen-dataset", cmd_gen_dataset, "generate a training dataset")
    p.add_argument("--config")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "fit a soft sensor on a dataset")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=("1d", "2d"), required=True)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--history", default=None)

    p = add("cv", cmd_cv, "five-fold cross-validation with grid search")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=("1d", "2d"), required=True)
    p.add_argument("--batch", default=",".join(str(v) for v in BATCH_GRID))
    p.add_argument("--lr", default=",".join(str(v) for v in LR_GRID))
    p.add_argument("--width", default=",".join(str(v) for v in WIDTH_GRID))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("saliency", cmd_saliency, "input-attribution map for one frame")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--M", dest="m_samples", type=int, default=25)
    p.add_argument("--sigma", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("closed-loop", cmd_closed_loop, "run the PID loop -> trajectory CSV")
    p.add_argument("--config")
    p.add_argument("--sensor", default="oracle",
                   help="'oracle' or a .panet checkpoint path")
    p.add_argument("--setpoint", type=float, default=None)
    p.add_argument("--gains", default=None, help="KP,TI,TD (default 47,15.3,0.0234)")
    p.add_argument("--steps", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-speed", type=float, default=None)
    p.add_argument("--out", required=True)

    p = add("tune", cmd_tune, "Bayesian-optimization controller tuning")
    p.add_argument("--config")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sensor", default="oracle")
    p.add_argument("--out", required=True)

    p = add("surface", cmd_surface, "objective over a (K_P, tau_I) grid")
    p.add_argument("--config")
    p.add_argument("--grid", default="32x32")
    p.add_argument("--tau-d", type=float, default=0.0234)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sensor", default="oracle")
    p.add_argument("--out", required=True)

    p = add("serve", cmd_serve, "live session service (websocket + console)")
    p.add_argument("--config")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--tick-rate", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sensor", default=None)

    p = add("example-config", cmd_example_config, "write a commented default config")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (ConfigError, FormatError, InvalidParameterError,
            FileNotFoundError, IsADirectoryError) as err:
        print(f"pastsim: error: {err}", file=sys.stderr)
        return 2
    except PastsimError as err:
        print(f"pastsim: runtime failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
