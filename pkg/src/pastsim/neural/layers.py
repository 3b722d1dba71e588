"""Batched CNN layers with hand-written forward and backward passes.

Convolutions are valid (no padding), stride 1, and are evaluated as one
GEMM per layer: input windows are gathered with stride tricks, flattened,
and multiplied against the flattened kernel bank. Average pooling uses
floor division and drops the final partial window. Every backward pass
returns the input gradient plus a dict of parameter gradients shaped like
the parameters.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import ShapeError


class ReLU:
    params = ()

    def forward(self, x):
        y = np.maximum(x, 0)
        return y, (x > 0)

    def backward(self, cache, dy):
        return dy * cache, {}

    def out_shape(self, shape):
        return shape


class Conv1D:
    """Valid 1D convolution over (batch, channels, length) inputs."""

    params = ("w", "b")

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float32):
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        scale = np.sqrt(2.0 / (in_channels * kernel))
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w = (rng.normal(0.0, scale, size=(filters, in_channels, kernel))
                  .astype(dtype))
        # slightly positive so ReLU units start alive on low-contrast frames
        self.b = np.full(filters, 0.01, dtype=dtype)

    def out_shape(self, shape):
        c, length = shape
        if c != self.in_channels:
            raise ShapeError(f"conv1d expects {self.in_channels} channels, got {c}")
        if length < self.kernel:
            raise ShapeError(f"conv1d input length {length} shorter than kernel {self.kernel}")
        return (self.filters, length - self.kernel + 1)

    def forward(self, x):
        bsz, c, length = x.shape
        _, l_out = self.out_shape((c, length))
        sb, sc, sl = x.strides
        windows = as_strided(x, (bsz, c, l_out, self.kernel), (sb, sc, sl, sl))
        xw = windows.transpose(0, 2, 1, 3).reshape(bsz * l_out, c * self.kernel)
        w2 = self.w.reshape(self.filters, -1)
        y = xw @ w2.T + self.b
        y = y.reshape(bsz, l_out, self.filters).transpose(0, 2, 1)
        return np.ascontiguousarray(y), (xw, x.shape)

    def backward(self, cache, dy):
        xw, x_shape = cache
        bsz, c, length = x_shape
        l_out = dy.shape[2]
        dy2 = dy.transpose(0, 2, 1).reshape(bsz * l_out, self.filters)
        dw = (dy2.T @ xw).reshape(self.w.shape)
        db = dy2.sum(axis=0)
        dxw = (dy2 @ self.w.reshape(self.filters, -1)) \
            .reshape(bsz, l_out, c, self.kernel)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        for k in range(self.kernel):
            dx[:, :, k:k + l_out] += dxw[:, :, :, k].transpose(0, 2, 1)
        return dx, {"w": dw, "b": db}


class Conv2D:
    """Valid 2D convolution over (batch, channels, height, width) inputs."""

    params = ("w", "b")

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float32):
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        scale = np.sqrt(2.0 / (in_channels * kernel * kernel))
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w = (rng.normal(0.0, scale, size=(filters, in_channels, kernel, kernel))
                  .astype(dtype))
        self.b = np.full(filters, 0.01, dtype=dtype)

    def out_shape(self, shape):
        c, h, w = shape
        if c != self.in_channels:
            raise ShapeError(f"conv2d expects {self.in_channels} channels, got {c}")
        if h < self.kernel or w < self.kernel:
            raise ShapeError(f"conv2d input {h}x{w} smaller than kernel {self.kernel}")
        return (self.filters, h - self.kernel + 1, w - self.kernel + 1)

    def forward(self, x):
        bsz, c, h, w = x.shape
        _, h_out, w_out = self.out_shape((c, h, w))
        k = self.kernel
        sb, sc, sh, sw = x.strides
        windows = as_strided(x, (bsz, c, h_out, w_out, k, k),
                             (sb, sc, sh, sw, sh, sw))
        xw = windows.transpose(0, 2, 3, 1, 4, 5).reshape(bsz * h_out * w_out, c * k * k)
        w2 = self.w.reshape(self.filters, -1)
        y = xw @ w2.T + self.b
        y = y.reshape(bsz, h_out, w_out, self.filters).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(y), (xw, x.shape, (h_out, w_out))

    def backward(self, cache, dy):
        xw, x_shape, (h_out, w_out) = cache
        bsz, c, h, w = x_shape
        k = self.kernel
        dy2 = dy.transpose(0, 2, 3, 1).reshape(bsz * h_out * w_out, self.filters)
        dw = (dy2.T @ xw).reshape(self.w.shape)
        db = dy2.sum(axis=0)
        dxw = (dy2 @ self.w.reshape(self.filters, -1)) \
            .reshape(bsz, h_out, w_out, c, k, k)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        for ki in range(k):
            for kj in range(k):
                dx[:, :, ki:ki + h_out, kj:kj + w_out] += \
                    dxw[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
        return dx, {"w": dw, "b": db}


class AvgPool1D:
    params = ()

    def __init__(self, window=2):
        self.window = window

    def out_shape(self, shape):
        c, length = shape
        if length < self.window:
            raise ShapeError(f"avgpool1d input length {length} shorter than window")
        return (c, length // self.window)

    def forward(self, x):
        bsz, c, length = x.shape
        l_out = length // self.window
        crop = l_out * self.window
        y = x[:, :, :crop].reshape(bsz, c, l_out, self.window).mean(axis=3)
        return y, (x.shape, crop)

    def backward(self, cache, dy):
        x_shape, crop = cache
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[:, :, :crop] = np.repeat(dy / self.window, self.window, axis=2)
        return dx, {}


class AvgPool2D:
    params = ()

    def __init__(self, window=2):
        self.window = window

    def out_shape(self, shape):
        c, h, w = shape
        if h < self.window or w < self.window:
            raise ShapeError(f"avgpool2d input {h}x{w} smaller than window")
        return (c, h // self.window, w // self.window)

    def forward(self, x):
        bsz, c, h, w = x.shape
        ww = self.window
        h_out, w_out = h // ww, w // ww
        y = (x[:, :, :h_out * ww, :w_out * ww]
             .reshape(bsz, c, h_out, ww, w_out, ww).mean(axis=(3, 5)))
        return y, (x.shape, h_out * ww, w_out * ww)

    def backward(self, cache, dy):
        x_shape, ch, cw = cache
        ww = self.window
        dx = np.zeros(x_shape, dtype=dy.dtype)
        scaled = dy / (ww * ww)
        dx[:, :, :ch, :cw] = np.repeat(np.repeat(scaled, ww, axis=2), ww, axis=3)
        return dx, {}


class Dense:
    """Fully connected layer; flattens any trailing input dims."""

    params = ("w", "b")

    def __init__(self, in_features, units, rng=None, dtype=np.float32):
        self.in_features = in_features
        self.units = units
        scale = np.sqrt(2.0 / in_features)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.w = rng.normal(0.0, scale, size=(units, in_features)).astype(dtype)
        self.b = np.full(units, 0.01, dtype=dtype)

    def out_shape(self, shape):
        flat = int(np.prod(shape))
        if flat != self.in_features:
            raise ShapeError(f"dense expects {self.in_features} features, got {flat}")
        return (self.units,)

    def forward(self, x):
        bsz = x.shape[0]
        x2 = x.reshape(bsz, -1)
        if x2.shape[1] != self.in_features:
            raise ShapeError(
                f"dense expects {self.in_features} features, got {x2.shape[1]}")
        return x2 @ self.w.T + self.b, (x2, x.shape)

    def backward(self, cache, dy):
        x2, x_shape = cache
        dw = dy.T @ x2
        db = dy.sum(axis=0)
        dx = (dy @ self.w).reshape(x_shape)
        return dx, {"w": dw, "b": db}
