"""From-scratch convolutional soft sensors (PaNet-1D / PaNet-2D)."""

from .metrics import r2, rmse
from .model import (LabelScale, LayerSpec, SensorModel, backward, build_model,
                    forward, load_model, mse_loss, panet_specs, save_model)
from .saliency import smoothgrad
from .training import (BATCH_GRID, LR_GRID, WIDTH_GRID, Adam, CVReport,
                       EpochStats, FoldResult, TrainConfig, TrainResult,
                       cross_validate, evaluate, fold_slices, train,
                       write_history_csv)

__all__ = [
    "LabelScale", "LayerSpec", "SensorModel", "backward", "build_model",
    "forward", "load_model", "mse_loss", "panet_specs", "save_model",
    "smoothgrad", "r2", "rmse", "BATCH_GRID", "LR_GRID", "WIDTH_GRID",
    "Adam", "CVReport", "EpochStats", "FoldResult", "TrainConfig",
    "TrainResult", "cross_validate", "evaluate", "fold_slices", "train",
    "write_history_csv",
]
