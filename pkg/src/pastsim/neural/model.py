"""PaNet soft-sensor models: layer chains, forward/backward, checkpoints.

Two architectures are built in. The 1D variant treats a frame as 65 width
channels over a length-637 axis; the 2D variant as a single-channel image.
Both stack three (conv -> relu -> pool) blocks and three dense layers with
ReLU after every parameterized layer, including the output, so predictions
are non-negative. The width hyperparameter n sets both the filter count and
the hidden unit count.

Checkpoints are little-endian: a fixed header (magic, version, arch id, n,
frame dims, label-scale triple), a layer table, then each layer's f32
parameter blobs in order.
"""

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, InvalidParameterError, ShapeError
from .layers import AvgPool1D, AvgPool2D, Conv1D, Conv2D, Dense, ReLU

CKPT_MAGIC = b"PANETCK1"
_CKPT_HEADER = struct.Struct("<8sHBBIIIfffI")
_LAYER_ENTRY = struct.Struct("<BBHII")

_KIND_IDS = {"conv1d": 1, "conv2d": 2, "avgpool1d": 3, "avgpool2d": 4,
             "dense": 5, "relu": 6}
_ID_KINDS = {v: k for k, v in _KIND_IDS.items()}
_ARCH_IDS = {"custom": 0, "1d": 1, "2d": 2}
_ID_ARCHS = {v: k for k, v in _ARCH_IDS.items()}


@dataclass
class LayerSpec:
    kind: str
    filters: int = 0     # conv filter count / dense units
    kernel: int = 0      # conv kernel size (square for 2d)
    window: int = 0      # pooling window


@dataclass
class LabelScale:
    """Affine label scaling used during training.

    Temperature maps through the frame normalization (t - t_lo)/(t_hi - t_lo);
    flow is divided by flow_scale (the per-deposition pastille maximum h).
    """

    t_lo: float = 72.0
    t_hi: float = 212.0
    flow_scale: float = 1.0

    def scale(self, labels):
        out = np.empty_like(labels, dtype=np.float64)
        out[..., 0] = (labels[..., 0] - self.t_lo) / (self.t_hi - self.t_lo)
        out[..., 1] = labels[..., 1] / self.flow_scale
        return out

    def unscale(self, scaled):
        out = np.empty_like(scaled, dtype=np.float64)
        out[..., 0] = scaled[..., 0] * (self.t_hi - self.t_lo) + self.t_lo
        out[..., 1] = scaled[..., 1] * self.flow_scale
        return out


def panet_specs(arch, n):
    """Layer chain for the requested architecture at width n."""
    if arch == "1d":
        conv, pool = "conv1d", "avgpool1d"
    elif arch == "2d":
        conv, pool = "conv2d", "avgpool2d"
    else:
        raise InvalidParameterError(f"unknown architecture {arch!r}")
    specs = []
    for _ in range(3):
        specs += [LayerSpec(conv, filters=n, kernel=3), LayerSpec("relu"),
                  LayerSpec(pool, window=2)]
    specs += [LayerSpec("dense", filters=n), LayerSpec("relu"),
              LayerSpec("dense", filters=n), LayerSpec("relu"),
              LayerSpec("dense", filters=2), LayerSpec("relu")]
    return specs


class SensorModel:
    """A layer chain plus everything needed to run it on raw frames."""

    def __init__(self, specs, input_dims=(637, 65), arch="custom", width=0,
                 seed=0, dtype=np.float32, label_scale=None):
        self.specs = list(specs)
        self.input_dims = tuple(input_dims)
        self.arch = arch
        self.width = width
        self.dtype = np.dtype(dtype)
        self.label_scale = label_scale if label_scale is not None else LabelScale()
        rng = np.random.default_rng(seed)
        self.layers = []
        shape = self._net_input_shape()
        for spec in self.specs:
            layer = _instantiate(spec, shape, rng, self.dtype)
            shape = layer.out_shape(shape)
            self.layers.append(layer)
        if shape != (2,):
            raise ShapeError(f"model must end with 2 outputs, chain ends at {shape}")
        # Start the output unit alive: with a ReLU output head a zero bias can
        # leave both predictions pinned at 0 with zero gradient forever.
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                layer.b = layer.b + self.dtype.type(0.5)
                break

    def _net_input_shape(self):
        ny, nx = self.input_dims
        if self.arch == "2d":
            return (1, ny, nx)
        if self.arch == "1d":
            return (nx, ny)
        first = self.specs[0].kind if self.specs else "dense"
        if first in ("conv2d", "avgpool2d"):
            return (1, ny, nx)
        return (nx, ny)

    def shape_chain(self):
        """Per-layer output shapes, starting from the network input shape."""
        shapes = [self._net_input_shape()]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    def prepare(self, x):
        """Map frame pixels (ny, nx) or a batch of them to network inputs."""
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != self.input_dims:
            raise ShapeError(
                f"expected frames of shape {self.input_dims}, got {x.shape}")
        net_shape = self._net_input_shape()
        if len(net_shape) == 3:
            xb = x[:, None, :, :]
        else:
            xb = np.ascontiguousarray(x.transpose(0, 2, 1))
        return xb, single

    def restore_input_grad(self, grad, single):
        """Map a network-input gradient back to frame orientation."""
        if grad.ndim == 4:      # (B, 1, ny, nx)
            out = grad[:, 0, :, :]
        else:                   # (B, nx, ny)
            out = grad.transpose(0, 2, 1)
        return out[0] if single else out

    def parameters(self):
        """Ordered (layer index, name, array) triples of all parameters."""
        out = []
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                out.append((i, name, getattr(layer, name)))
        return out

    def set_parameters(self, values):
        for (i, name, _), array in zip(self.parameters(), values):
            setattr(self.layers[i], name, array)

    def parameter_count(self):
        return sum(arr.size for _, _, arr in self.parameters())

    def copy_parameters(self):
        return [arr.copy() for _, _, arr in self.parameters()]


def _instantiate(spec, shape, rng, dtype):
    kind = spec.kind
    if kind == "relu":
        return ReLU()
    if kind == "conv1d":
        return Conv1D(shape[0], spec.filters, spec.kernel, rng=rng, dtype=dtype)
    if kind == "conv2d":
        return Conv2D(shape[0], spec.filters, spec.kernel, rng=rng, dtype=dtype)
    if kind == "avgpool1d":
        return AvgPool1D(spec.window)
    if kind == "avgpool2d":
        return AvgPool2D(spec.window)
    if kind == "dense":
        return Dense(int(np.prod(shape)), spec.filters, rng=rng, dtype=dtype)
    raise InvalidParameterError(f"unknown layer kind {kind!r}")


def build_model(arch, n, input_dims=(637, 65), seed=0, dtype=np.float32,
                label_scale=None) -> SensorModel:
    return SensorModel(panet_specs(arch, n), input_dims=input_dims, arch=arch,
                       width=n, seed=seed, dtype=dtype, label_scale=label_scale)


def forward(model: SensorModel, x):
    """Run the network; returns (2,) for one frame or (B, 2) for a batch."""
    xb, single = model.prepare(x)
    out, _ = forward_cached(model, xb)
    return out[0] if single else out


def forward_cached(model: SensorModel, xb):
    caches = []
    h = xb
    for layer in model.layers:
        h, cache = layer.forward(h)
        caches.append(cache)
    return h, caches


def mse_loss(y, y_hat) -> float:
    """Mean squared error over all samples and both output dims."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError(f"label shape {y.shape} != prediction shape {y_hat.shape}")
    if y.size == 0:
        raise InvalidParameterError("empty batch has no loss")
    return float(np.mean((y - y_hat) ** 2))


def backward(model: SensorModel, x, y):
    """Gradients of the MSE loss w.r.t. every parameter and the input.

    Returns (param_grads, input_grad): param_grads is a per-layer list of
    dicts shaped like each layer's parameters; input_grad matches the frame
    orientation of x.
    """
    xb, single = model.prepare(x)
    y = np.asarray(y, dtype=np.float64)
    if single:
        y = y.reshape(1, -1)
    if y.shape != (xb.shape[0], 2):
        raise ShapeError(f"labels must be ({xb.shape[0]}, 2), got {y.shape}")
    out, caches = forward_cached(model, xb)
    delta = (2.0 * (out.astype(np.float64) - y) / y.size).astype(model.dtype)
    param_grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        delta, grads = model.layers[i].backward(caches[i], delta)
        param_grads[i] = grads
    input_grad = model.restore_input_grad(delta, single)
    return param_grads, input_grad


def save_model(path, model: SensorModel):
    """Write the checkpoint: header, layer table, then f32 parameter blobs."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(
            CKPT_MAGIC, 1, _ARCH_IDS.get(model.arch, 0), 0,
            model.width, model.input_dims[0], model.input_dims[1],
            model.label_scale.t_lo, model.label_scale.t_hi,
            model.label_scale.flow_scale, len(model.specs)))
        for spec in model.specs:
            fh.write(_LAYER_ENTRY.pack(_KIND_IDS[spec.kind], 0, 0,
                                       spec.filters, max(spec.kernel, spec.window)))
        for _, _, arr in model.parameters():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path) -> SensorModel:
    with open(path, "rb") as fh:
        raw = fh.read(_CKPT_HEADER.size)
        if len(raw) < _CKPT_HEADER.size:
            raise FormatError("file too short for checkpoint header", offset=len(raw))
        (magic, version, arch_id, _, n, ny, nx,
         t_lo, t_hi, flow_scale, n_layers) = _CKPT_HEADER.unpack(raw)
        if magic != CKPT_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CKPT_MAGIC!r}", offset=0)
        if version != 1:
            raise FormatError(f"unsupported checkpoint version {version}")
        specs = []
        for _ in range(n_layers):
            raw = fh.read(_LAYER_ENTRY.size)
            if len(raw) < _LAYER_ENTRY.size:
                raise FormatError("checkpoint truncated inside layer table")
            kind_id, _, _, filters, size = _LAYER_ENTRY.unpack(raw)
            if kind_id not in _ID_KINDS:
                raise FormatError(f"unknown layer kind id {kind_id}")
            kind = _ID_KINDS[kind_id]
            spec = LayerSpec(kind, filters=filters)
            if kind.startswith("conv"):
                spec.kernel = size
            elif kind.startswith("avgpool"):
                spec.window = size
            specs.append(spec)
        model = SensorModel(specs, input_dims=(ny, nx), arch=_ID_ARCHS[arch_id],
                            width=n, seed=0, dtype=np.float32,
                            label_scale=LabelScale(t_lo, t_hi, flow_scale))
        values = []
        for _, _, arr in model.parameters():
            blob = fh.read(4 * arr.size)
            if len(blob) < 4 * arr.size:
                raise FormatError("checkpoint truncated inside parameter blobs")
            values.append(np.frombuffer(blob, dtype="<f4").reshape(arr.shape).copy())
        if fh.read(1):
            raise FormatError("trailing bytes after checkpoint parameters")
        model.set_parameters(values)
        return model
