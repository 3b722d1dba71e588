"""Regression metrics, per target."""

import numpy as np

from ..errors import InvalidParameterError, UndefinedMetricError


def rmse(y, y_hat):
    """Root mean squared error; per-column when given 2D arrays."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.size == 0:
        raise InvalidParameterError("rmse needs matching non-empty arrays")
    out = np.sqrt(np.mean((y - y_hat) ** 2, axis=0))
    return float(out) if out.ndim == 0 else out


def r2(y, y_hat):
    """Coefficient of determination 1 - SS_res/SS_tot; per-column for 2D."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.shape[0] < 2:
        raise InvalidParameterError("r2 needs matching arrays with n >= 2")
    ss_tot = np.sum((y - y.mean(axis=0)) ** 2, axis=0)
    if np.any(ss_tot == 0):
        raise UndefinedMetricError("r2 undefined for zero-variance targets")
    ss_res = np.sum((y - y_hat) ** 2, axis=0)
    out = 1.0 - ss_res / ss_tot
    return float(out) if out.ndim == 0 else out
