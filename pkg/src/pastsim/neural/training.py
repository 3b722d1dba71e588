"""Mini-batch training with Adam, and five-fold cross-validation.

Labels are scaled before fitting: temperature through the frame
normalization, flow by the per-deposition pastille maximum. The model with
the lowest average validation RMSE (mean of the two scaled targets) over
the epochs is returned; early stopping triggers after ``patience`` epochs
without improvement. Reported metrics are always in original units.
"""

import itertools
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from ..errors import InvalidParameterError, TrainingFailureError
from .metrics import r2, rmse
from .model import LabelScale, SensorModel, backward, build_model, forward_cached

BATCH_GRID = (32, 64, 128)
LR_GRID = (0.0005, 0.001, 0.005)
WIDTH_GRID = (64, 128, 256)


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.0005
    width: int = 64
    epochs: int = 200
    seed: int = 0
    patience: int = 10
    val_fraction: float = 0.2
    flow_scale: float = None    # None -> max of the training flow labels
    augment_mirror: bool = True # belt-width mirror; labels are invariant
    lr_warmup_batches: int = 100
    dtype: str = "float32"

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.width < 1:
            raise InvalidParameterError("batch size, epochs, and width must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidParameterError("learning rate must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidParameterError("val_fraction must lie in (0, 1)")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_rmse_temp: float   # degF
    val_rmse_flow: float   # pastilles per step


@dataclass
class TrainResult:
    model: SensorModel
    history: list
    best_epoch: int
    best_val_metric: float  # mean of the two scaled validation RMSEs

    def __iter__(self):     # allow: model, history = train(...)
        return iter((self.model, self.history))


class Adam:
    """Standard Adam update with a short linear learning-rate warmup.

    The warmup tames the first few dozen steps, where consistent-sign
    gradients at full rate can push an output unit's pre-activation
    permanently below its ReLU and silently kill that prediction head.
    """

    def __init__(self, model, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 warmup_steps=0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.warmup_steps = warmup_steps
        self.t = 0
        self.m = [np.zeros_like(arr) for _, _, arr in model.parameters()]
        self.v = [np.zeros_like(arr) for _, _, arr in model.parameters()]

    def step(self, model, param_grads):
        self.t += 1
        lr = self.lr
        if self.warmup_steps > 0 and self.t < self.warmup_steps:
            lr = self.lr * self.t / self.warmup_steps
        flat = []
        for i, layer in enumerate(model.layers):
            for name in layer.params:
                flat.append(param_grads[i][name])
        for k, ((i, name, arr), g) in enumerate(zip(model.parameters(), flat)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            m_hat = self.m[k] / (1 - self.beta1 ** self.t)
            v_hat = self.v[k] / (1 - self.beta2 ** self.t)
            arr -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(arr.dtype)


def _predict_scaled(model, pixels, batch=256):
    outs = []
    for k in range(0, len(pixels), batch):
        xb, _ = model.prepare(pixels[k:k + batch])
        out, _ = forward_cached(model, xb)
        outs.append(out)
    return np.concatenate(outs, axis=0).astype(np.float64)


def train(dataset, arch, config: TrainConfig, input_dims=None,
          t_lo=72.0, t_hi=212.0) -> TrainResult:
    """Fit a PaNet on (pixels, labels) with 20% of the data held as validation."""
    pixels, labels = dataset
    pixels = np.asarray(pixels)
    labels = np.asarray(labels, dtype=np.float64)
    n = len(pixels)
    if n < 2 or len(labels) != n:
        raise InvalidParameterError("dataset needs >= 2 frames with matching labels")
    if input_dims is None:
        input_dims = pixels.shape[1:]

    flow_scale = config.flow_scale
    if flow_scale is None:
        flow_scale = float(max(labels[:, 1].max(), 1e-12))
    scale = LabelScale(t_lo=t_lo, t_hi=t_hi, flow_scale=flow_scale)

    rng = np.random.default_rng(config.seed)
    model = build_model(arch, config.width, input_dims=input_dims,
                        seed=config.seed, dtype=config.dtype, label_scale=scale)
    # Warm-start the output bias at the mean scaled label: a large constant
    # error signal at init otherwise drives consistent-sign gradients that
    # collapse the small-activation hidden ReLUs before it can adapt.
    target_mean = scale.scale(labels).mean(axis=0)
    for layer in reversed(model.layers):
        if hasattr(layer, "b") and layer.b.shape == (2,):
            layer.b = np.maximum(target_mean, 0.0).astype(model.dtype)
            break

    # Contiguous tail as validation: keeps whole generation episodes out of
    # the fit and makes duplicated-by-pairs datasets split identically.
    n_val = max(1, int(round(n * config.val_fraction)))
    train_idx = np.arange(0, n - n_val)
    val_idx = np.arange(n - n_val, n)
    if len(train_idx) < 1:
        raise InvalidParameterError("dataset too small to carve a validation split")
    x_train, y_train = pixels[train_idx], scale.scale(labels[train_idx])
    x_val, y_val_raw = pixels[val_idx], labels[val_idx]
    y_val = scale.scale(y_val_raw)

    opt = Adam(model, lr=config.learning_rate,
               warmup_steps=config.lr_warmup_batches)
    history = []
    best_metric = np.inf
    best_epoch = -1
    best_params = model.copy_parameters()
    stale = 0
    batch = min(config.batch_size, len(train_idx))

    for epoch in range(config.epochs):
        order = rng.permutation(len(train_idx))
        losses = []
        for k in range(0, len(order), batch):
            idx = order[k:k + batch]
            x_batch = x_train[idx]
            if config.augment_mirror:
                flip = rng.random(len(idx)) < 0.5
                x_batch[flip] = x_batch[flip, :, ::-1]
            xb, _ = model.prepare(x_batch)
            out, caches = forward_cached(model, xb)
            err = out.astype(np.float64) - y_train[idx]
            loss = float(np.mean(err ** 2))
            if not np.isfinite(loss):
                raise TrainingFailureError(
                    f"training loss became non-finite at epoch {epoch}", epoch=epoch)
            delta = (2.0 * err / err.size).astype(model.dtype)
            param_grads = [None] * len(model.layers)
            d = delta
            for i in range(len(model.layers) - 1, -1, -1):
                d, grads = model.layers[i].backward(caches[i], d)
                param_grads[i] = grads
            opt.step(model, param_grads)
            losses.append((loss, len(idx)))

        train_loss = float(sum(l * w for l, w in losses) / sum(w for _, w in losses))
        val_pred = _predict_scaled(model, x_val)
        val_loss = float(np.mean((val_pred - y_val) ** 2))
        if not np.isfinite(val_loss):
            raise TrainingFailureError(
                f"validation loss became non-finite at epoch {epoch}", epoch=epoch)
        rmse_scaled = np.sqrt(np.mean((val_pred - y_val) ** 2, axis=0))
        metric = float(rmse_scaled.mean())
        val_unscaled = scale.unscale(val_pred)
        history.append(EpochStats(
            epoch=epoch, train_loss=train_loss, val_loss=val_loss,
            val_rmse_temp=float(rmse(y_val_raw[:, 0], val_unscaled[:, 0])),
            val_rmse_flow=float(rmse(y_val_raw[:, 1], val_unscaled[:, 1]))))

        if metric < best_metric:
            best_metric = metric
            best_epoch = epoch
            best_params = model.copy_parameters()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break

    model.set_parameters(best_params)
    return TrainResult(model=model, history=history, best_epoch=best_epoch,
                       best_val_metric=best_metric)


def evaluate(model: SensorModel, pixels, labels):
    """Test-set metrics in original units: per-target RMSE and R^2."""
    pred = model.label_scale.unscale(_predict_scaled(model, pixels))
    labels = np.asarray(labels, dtype=np.float64)
    return {
        "rmse_temp": float(rmse(labels[:, 0], pred[:, 0])),
        "rmse_flow": float(rmse(labels[:, 1], pred[:, 1])),
        "r2_temp": float(r2(labels[:, 0], pred[:, 0])),
        "r2_flow": float(r2(labels[:, 1], pred[:, 1])),
    }


@dataclass
class FoldResult:
    fold: int
    config: TrainConfig
    rmse_temp: float
    rmse_flow: float
    r2_temp: float
    r2_flow: float


@dataclass
class CVReport:
    folds: list = dc_field(default_factory=list)

    def summary(self):
        out = {}
        for key in ("rmse_temp", "rmse_flow", "r2_temp", "r2_flow"):
            vals = np.array([getattr(f, key) for f in self.folds])
            out[key] = (float(vals.mean()), float(vals.std()))
        return out

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("fold,batch_size,learning_rate,width,"
                     "rmse_temp,rmse_flow,r2_temp,r2_flow\n")
            for f in self.folds:
                fh.write("%d,%d,%r,%d,%r,%r,%r,%r\n" % (
                    f.fold, f.config.batch_size, f.config.learning_rate,
                    f.config.width, f.rmse_temp, f.rmse_flow, f.r2_temp, f.r2_flow))
            s = self.summary()
            fh.write("mean,,,,%r,%r,%r,%r\n" % tuple(s[k][0] for k in (
                "rmse_temp", "rmse_flow", "r2_temp", "r2_flow")))
            fh.write("std,,,,%r,%r,%r,%r\n" % tuple(s[k][1] for k in (
                "rmse_temp", "rmse_flow", "r2_temp", "r2_flow")))


def fold_slices(n, k=5):
    """Contiguous fold index ranges; the remainder goes to the last fold."""
    size = n // k
    bounds = [(i * size, (i + 1) * size) for i in range(k)]
    bounds[-1] = (bounds[-1][0], n)
    return bounds


def cross_validate(dataset, arch, grid=None, base_config: TrainConfig = None,
                   folds=5, t_lo=72.0, t_hi=212.0) -> CVReport:
    """Five-fold CV with per-fold hyperparameter selection.

    ``grid`` maps config field names to candidate lists (defaults to the
    standard batch/lr/width grids). Each fold serves as the test set once;
    per fold, the combo with the lowest average validation RMSE wins and its
    model is scored on the held-out fold.
    """
    if grid is None:
        grid = {"batch_size": list(BATCH_GRID), "learning_rate": list(LR_GRID),
                "width": list(WIDTH_GRID)}
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise InvalidParameterError("hyperparameter grid must be non-empty")
    base = base_config if base_config is not None else TrainConfig()

    pixels, labels = dataset
    pixels = np.asarray(pixels)
    labels = np.asarray(labels, dtype=np.float64)
    n = len(pixels)
    if n < folds:
        raise InvalidParameterError(f"need at least {folds} records for {folds}-fold CV")

    keys = sorted(grid.keys())
    combos = [dict(zip(keys, values))
              for values in itertools.product(*(grid[k] for k in keys))]

    report = CVReport()
    for fold, (lo, hi) in enumerate(fold_slices(n, folds)):
        test_idx = np.arange(lo, hi)
        pool_idx = np.concatenate([np.arange(0, lo), np.arange(hi, n)])
        best = None
        for combo in combos:
            cfg = replace(base, **combo)
            result = train((pixels[pool_idx], labels[pool_idx]), arch, cfg,
                           t_lo=t_lo, t_hi=t_hi)
            if best is None or result.best_val_metric < best[0].best_val_metric:
                best = (result, cfg)
        result, cfg = best
        scores = evaluate(result.model, pixels[test_idx], labels[test_idx])
        report.folds.append(FoldResult(fold=fold, config=cfg, **scores))
    return report


def write_history_csv(path, history):
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,val_rmse_temp,val_rmse_flow\n")
        for s in history:
            fh.write("%d,%r,%r,%r,%r\n" % (s.epoch, s.train_loss, s.val_loss,
                                           s.val_rmse_temp, s.val_rmse_flow))
