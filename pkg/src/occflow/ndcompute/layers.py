"""The fixed layer set: convolutions, pooling, dense, reshaping, activations.

All spatial layers are batch-first and channels-last: 2D layers take
``(N, H, W, C)`` and 1D layers take ``(N, L, C)``. Convolutions use
"same" padding with stride 1, so only channel counts change through them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigurationError, StateError
from .tensor import DTYPE, Tensor

KINDS = (
    "conv2d",
    "conv1d",
    "dense",
    "maxpool2d",
    "upsample2d",
    "avgpool1d",
    "flatten",
    "reshape",
    "activation",
)
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid")


@dataclass
class LayerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown layer kind {self.kind!r}")
        p = self.params
        for key in ("filters", "units", "kernel_size", "size"):
            if key in p and (not isinstance(p[key], int) or p[key] <= 0):
                raise ConfigurationError(f"{self.kind}: {key} must be a positive integer, got {p[key]!r}")
        if self.kind == "activation" and p.get("name") not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {p.get('name')!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(d["kind"], dict(d.get("params", {})))


# Convenience constructors, used by the model architectures.
def conv2d(filters, kernel_size=3, bias=True):
    return LayerSpec("conv2d", {"filters": filters, "kernel_size": kernel_size, "bias": bias})


def conv1d(filters, kernel_size=3, bias=True):
    return LayerSpec("conv1d", {"filters": filters, "kernel_size": kernel_size, "bias": bias})


def dense(units, bias=True):
    return LayerSpec("dense", {"units": units, "bias": bias})


def maxpool2d(size=2):
    return LayerSpec("maxpool2d", {"size": size})


def upsample2d(size=2):
    return LayerSpec("upsample2d", {"size": size})


def avgpool1d(size=2):
    return LayerSpec("avgpool1d", {"size": size})


def flatten():
    return LayerSpec("flatten")


def reshape(shape):
    return LayerSpec("reshape", {"shape": list(shape)})


def activation(name, alpha=None):
    params = {"name": name}
    if name == "leaky_relu":
        params["alpha"] = 0.3 if alpha is None else alpha
    return LayerSpec("activation", params)


class Layer:
    """Base class. Subclasses fill ``params`` during :meth:`build`."""

    has_weights = False

    def __init__(self, spec: LayerSpec, index: int):
        self.spec = spec
        self.index = index
        self.params: dict[str, Tensor] = {}
        self.in_shape: tuple | None = None
        self.out_shape: tuple | None = None
        self._cache = None

    @property
    def label(self) -> str:
        return f"layer {self.index} ({self.spec.kind})"

    def build(self, in_shape: tuple) -> tuple:
        self.in_shape = tuple(in_shape)
        self.out_shape = tuple(self._infer(self.in_shape))
        return self.out_shape

    def _infer(self, in_shape):
        raise NotImplementedError

    def _fail(self, msg):
        raise ConfigurationError(f"{self.label}: {msg}")

    def init_params(self, rng: np.random.Generator, scheme: str) -> None:
        pass

    def forward(self, x: np.ndarray, train: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray, param_grads: bool = True, input_grad: bool = True):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StateError(f"{self.label}: backward called before forward")
        cache, self._cache = self._cache, None
        return cache


def _uniform_init(rng, shape, fan_in, fan_out, scheme, alpha=0.0):
    if scheme == "he":
        gain = math.sqrt(2.0 / (1.0 + alpha**2))
        limit = gain * math.sqrt(3.0 / fan_in)
    elif scheme == "xavier":
        limit = math.sqrt(6.0 / (fan_in + fan_out))
    elif scheme == "zeros":
        return np.zeros(shape, dtype=DTYPE)
    else:
        raise ConfigurationError(f"unknown init scheme {scheme!r}")
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


class _ConvND(Layer):
    """Shared im2col machinery for same-padded, stride-1 convolutions."""

    has_weights = True
    spatial = 2

    def _infer(self, in_shape):
        if len(in_shape) != self.spatial + 1:
            self._fail(f"expects a rank-{self.spatial + 1} input per sample, got shape {in_shape}")
        k = self.spec.params.get("kernel_size", 3)
        if k % 2 != 1:
            self._fail("same padding requires an odd kernel size")
        c_in = in_shape[-1]
        filters = self.spec.params["filters"]
        self.params["W"] = Tensor(np.zeros((k,) * self.spatial + (c_in, filters)), name=f"{self.index}.W")
        if self.spec.params.get("bias", True):
            self.params["b"] = Tensor(np.zeros(filters), name=f"{self.index}.b")
        return in_shape[:-1] + (filters,)

    def init_params(self, rng, scheme):
        W = self.params["W"]
        k = W.shape[0]
        c_in, c_out = W.shape[-2:]
        W.data = _uniform_init(rng, W.shape, k**self.spatial * c_in, k**self.spatial * c_out,
                               scheme, self._alpha)
        if "b" in self.params:
            self.params["b"].data = np.zeros_like(self.params["b"].data)

    _alpha = 0.0

    def _cols(self, x):
        k = self.params["W"].shape[0]
        p = k // 2
        axes = tuple(range(1, self.spatial + 1))
        pad = [(0, 0)] + [(p, p)] * self.spatial + [(0, 0)]
        xp = np.pad(x, pad)
        win = sliding_window_view(xp, (k,) * self.spatial, axis=axes)
        # win: (N, *spatial, C, *kernel) -> (N, *spatial, *kernel, C)
        order = (0,) + axes + tuple(range(self.spatial + 2, 2 * self.spatial + 2)) + (self.spatial + 1,)
        win = win.transpose(order)
        return np.ascontiguousarray(win).reshape(-1, k**self.spatial * x.shape[-1])

    def _col2im(self, dcols, x_shape):
        k = self.params["W"].shape[0]
        p = k // 2
        n, c = x_shape[0], x_shape[-1]
        spatial = x_shape[1:-1]
        dcols = dcols.reshape((n,) + spatial + (k,) * self.spatial + (c,))
        g = np.zeros((n,) + tuple(s + 2 * p for s in spatial) + (c,), dtype=DTYPE)
        if self.spatial == 2:
            H, W_ = spatial
            for i in range(k):
                for j in range(k):
                    g[:, i:i + H, j:j + W_] += dcols[:, :, :, i, j]
            return g[:, p:p + H, p:p + W_]
        (L,) = spatial
        for i in range(k):
            g[:, i:i + L] += dcols[:, :, i]
        return g[:, p:p + L]

    def forward(self, x, train=True):
        W = self.params["W"].data
        cols = self._cols(x)
        y = cols @ W.reshape(-1, W.shape[-1])
        if "b" in self.params:
            y += self.params["b"].data
        if train:
            self._cache = (cols, x.shape)
        return y.reshape(x.shape[:-1] + (W.shape[-1],))

    def backward(self, dy, param_grads=True, input_grad=True):
        cols, x_shape = self._take_cache()
        W = self.params["W"]
        dyf = dy.reshape(-1, dy.shape[-1])
        if param_grads:
            W.set_grad((cols.T @ dyf).reshape(W.shape))
            if "b" in self.params:
                self.params["b"].set_grad(dyf.sum(axis=0))
        if not input_grad:
            return None
        dcols = dyf @ W.data.reshape(-1, W.shape[-1]).T
        return self._col2im(dcols, x_shape)


class Conv2D(_ConvND):
    spatial = 2


class Conv1D(_ConvND):
    spatial = 1


class Dense(Layer):
    has_weights = True
    _alpha = 0.0

    def _infer(self, in_shape):
        if len(in_shape) != 1:
            self._fail(f"expects flat input, got shape {in_shape}")
        units = self.spec.params["units"]
        self.params["W"] = Tensor(np.zeros((in_shape[0], units)), name=f"{self.index}.W")
        if self.spec.params.get("bias", True):
            self.params["b"] = Tensor(np.zeros(units), name=f"{self.index}.b")
        return (units,)

    def init_params(self, rng, scheme):
        W = self.params["W"]
        W.data = _uniform_init(rng, W.shape, W.shape[0], W.shape[1], scheme, self._alpha)
        if "b" in self.params:
            self.params["b"].data = np.zeros_like(self.params["b"].data)

    def forward(self, x, train=True):
        y = x @ self.params["W"].data
        if "b" in self.params:
            y += self.params["b"].data
        if train:
            self._cache = x
        return y

    def backward(self, dy, param_grads=True, input_grad=True):
        x = self._take_cache()
        if param_grads:
            self.params["W"].set_grad(x.T @ dy)
            if "b" in self.params:
                self.params["b"].set_grad(dy.sum(axis=0))
        if not input_grad:
            return None
        return dy @ self.params["W"].data.T


class MaxPool2D(Layer):
    def _infer(self, in_shape):
        s = self.spec.params.get("size", 2)
        if len(in_shape) != 3:
            self._fail(f"expects (H, W, C) input, got {in_shape}")
        h, w, c = in_shape
        if h % s or w % s:
            self._fail(f"spatial dims {h}x{w} are not divisible by pool size {s}")
        return (h // s, w // s, c)

    def forward(self, x, train=True):
        s = self.spec.params.get("size", 2)
        n, h, w, c = x.shape
        blocks = x.reshape(n, h // s, s, w // s, s, c).transpose(0, 1, 3, 5, 2, 4)
        blocks = blocks.reshape(n, h // s, w // s, c, s * s)
        idx = blocks.argmax(axis=-1)
        if train:
            self._cache = (idx, x.shape)
        return np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]

    def backward(self, dy, param_grads=True, input_grad=True):
        idx, x_shape = self._take_cache()
        if not input_grad:
            return None
        s = self.spec.params.get("size", 2)
        n, h, w, c = x_shape
        g = np.zeros(dy.shape + (s * s,), dtype=DTYPE)
        np.put_along_axis(g, idx[..., None], dy[..., None], axis=-1)
        g = g.reshape(n, h // s, w // s, c, s, s).transpose(0, 1, 4, 2, 5, 3)
        return g.reshape(x_shape)


class UpSample2D(Layer):
    def _infer(self, in_shape):
        s = self.spec.params.get("size", 2)
        if len(in_shape) != 3:
            self._fail(f"expects (H, W, C) input, got {in_shape}")
        h, w, c = in_shape
        return (h * s, w * s, c)

    def forward(self, x, train=True):
        s = self.spec.params.get("size", 2)
        if train:
            self._cache = True
        return x.repeat(s, axis=1).repeat(s, axis=2)

    def backward(self, dy, param_grads=True, input_grad=True):
        self._take_cache()
        if not input_grad:
            return None
        s = self.spec.params.get("size", 2)
        n, h, w, c = dy.shape
        return dy.reshape(n, h // s, s, w // s, s, c).sum(axis=(2, 4))


class AvgPool1D(Layer):
    def _infer(self, in_shape):
        s = self.spec.params.get("size", 2)
        if len(in_shape) != 2:
            self._fail(f"expects (L, C) input, got {in_shape}")
        length, c = in_shape
        if length % s:
            self._fail(f"length {length} is not divisible by pool size {s}")
        return (length // s, c)

    def forward(self, x, train=True):
        s = self.spec.params.get("size", 2)
        n, length, c = x.shape
        if train:
            self._cache = True
        return x.reshape(n, length // s, s, c).mean(axis=2)

    def backward(self, dy, param_grads=True, input_grad=True):
        self._take_cache()
        if not input_grad:
            return None
        s = self.spec.params.get("size", 2)
        return dy.repeat(s, axis=1) / s


class Reshape(Layer):
    def _infer(self, in_shape):
        if self.spec.kind == "flatten":
            return (int(np.prod(in_shape)),)
        target = tuple(self.spec.params["shape"])
        if int(np.prod(target)) != int(np.prod(in_shape)):
            self._fail(f"cannot reshape {in_shape} into {target}")
        return target

    def forward(self, x, train=True):
        if train:
            self._cache = True
        return x.reshape((x.shape[0],) + self.out_shape)

    def backward(self, dy, param_grads=True, input_grad=True):
        self._take_cache()
        if not input_grad:
            return None
        return dy.reshape((dy.shape[0],) + self.in_shape)


class Activation(Layer):
    def _infer(self, in_shape):
        return in_shape

    @property
    def name(self):
        return self.spec.params["name"]

    @property
    def alpha(self):
        return self.spec.params.get("alpha", 0.3)

    def forward(self, x, train=True):
        name = self.name
        if name == "relu":
            y = np.maximum(x, 0.0)
            cache = x > 0
        elif name == "leaky_relu":
            cache = x > 0
            y = np.where(cache, x, self.alpha * x)
        elif name == "tanh":
            y = np.tanh(x)
            cache = y
        else:
            # split by sign so exp never overflows
            y = np.empty_like(x)
            pos = x >= 0
            y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
            ex = np.exp(x[~pos])
            y[~pos] = ex / (1.0 + ex)
            cache = y
        if train:
            self._cache = cache
        return y

    def backward(self, dy, param_grads=True, input_grad=True):
        cache = self._take_cache()
        if not input_grad:
            return None
        name = self.name
        if name == "relu":
            return dy * cache
        if name == "leaky_relu":
            return np.where(cache, dy, self.alpha * dy)
        if name == "tanh":
            return dy * (1.0 - cache**2)
        return dy * cache * (1.0 - cache)


_LAYER_TYPES = {
    "conv2d": Conv2D,
    "conv1d": Conv1D,
    "dense": Dense,
    "maxpool2d": MaxPool2D,
    "upsample2d": UpSample2D,
    "avgpool1d": AvgPool1D,
    "flatten": Reshape,
    "reshape": Reshape,
    "activation": Activation,
}


def make_layer(spec: LayerSpec, index: int) -> Layer:
    return _LAYER_TYPES[spec.kind](spec, index)
