"""SmoothGrad saliency maps for the soft sensors.

The raw attribution is the gradient of the training loss with respect to
the input frame. SmoothGrad averages that gradient over M Gaussian
perturbations of the input, takes the absolute value, and min-max scales
the result to [0, 1]. A flat map (max == min) normalizes to all zeros.
"""

import numpy as np

from ..errors import InvalidParameterError
from .model import SensorModel, backward


def smoothgrad(model: SensorModel, x, y, m_samples=25, sigma=0.001, seed=0):
    """Averaged input-gradient saliency, min-max normalized to [0, 1].

    ``y`` is the label the loss is evaluated against (the simulator's true
    label when available, otherwise the model's own prediction). With
    sigma = 0 the result is the plain normalized gradient map, independent
    of ``m_samples``.
    """
    if m_samples < 1:
        raise InvalidParameterError("m_samples must be >= 1")
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    x = np.asarray(x)
    if sigma == 0.0:
        _, grad = backward(model, x, y)
        avg = grad.astype(np.float64)
    else:
        rng = np.random.default_rng(seed)
        total = np.zeros(x.shape, dtype=np.float64)
        for _ in range(m_samples):
            noisy = x + rng.normal(0.0, sigma, size=x.shape)
            _, grad = backward(model, noisy, y)
            total += grad.astype(np.float64)
        avg = total / m_samples
    mag = np.abs(avg)
    lo, hi = float(mag.min()), float(mag.max())
    if hi == lo:
        return np.zeros_like(mag)
    return (mag - lo) / (hi - lo)
