"""Sequential networks over the fixed layer set."""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ConfigurationError, NumericError, StateError
from .layers import LayerSpec, make_layer
from .tensor import DTYPE, Tensor


class Network:
    """A sequential stack of layers with shape inference at construction.

    ``trainable=False`` freezes the network: backward still propagates
    gradients to the input, but parameter gradients are never written.
    """

    def __init__(self, specs, input_shape, name: str = "net"):
        self.name = name
        self.specs = [s if isinstance(s, LayerSpec) else LayerSpec.from_dict(s) for s in specs]
        self.input_shape = tuple(int(d) for d in input_shape)
        self.layers = [make_layer(s, i) for i, s in enumerate(self.specs)]
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.build(shape)
        self.output_shape = shape
        self.trainable = True
        self._forwarded = False

    # -- parameters -------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params.values()]

    def named_parameters(self):
        for layer in self.layers:
            for key, p in layer.params.items():
                yield f"{layer.index}.{key}", p

    def weights(self) -> list[Tensor]:
        """Weight matrices/kernels only (no biases); what weight decay acts on."""
        return [layer.params["W"] for layer in self.layers if "W" in layer.params]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def init(self, rng: np.random.Generator) -> "Network":
        """He-uniform for layers feeding a (leaky) ReLU, Xavier-uniform otherwise."""
        for i, layer in enumerate(self.layers):
            if not layer.has_weights:
                continue
            scheme, alpha = "xavier", 0.0
            for nxt in self.layers[i + 1:]:
                if nxt.spec.kind in ("flatten", "reshape"):
                    continue
                if nxt.spec.kind == "activation" and nxt.spec.params["name"] in ("relu", "leaky_relu"):
                    scheme = "he"
                    if nxt.spec.params["name"] == "leaky_relu":
                        alpha = nxt.spec.params.get("alpha", 0.3)
                break
            scheme = layer.spec.params.get("init", scheme)
            layer._alpha = alpha
            layer.init_params(rng, scheme)
        return self

    def copy(self, name: str | None = None) -> "Network":
        other = Network(self.specs, self.input_shape, name or self.name)
        for (_, src), (_, dst) in zip(self.named_parameters(), other.named_parameters()):
            dst.data = src.data.copy()
        other.trainable = self.trainable
        return other

    def load_arrays(self, arrays) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ConfigurationError(f"{self.name}: expected {len(params)} arrays, got {len(arrays)}")
        for p, a in zip(params, arrays):
            a = np.asarray(a, dtype=DTYPE)
            if a.shape != p.shape:
                raise ConfigurationError(f"{self.name}: parameter {p.name} expects {p.shape}, got {a.shape}")
            p.data = a.copy()

    @contextlib.contextmanager
    def frozen(self):
        prev = self.trainable
        self.trainable = False
        try:
            yield self
        finally:
            self.trainable = prev

    # -- passes -------------------------------------------------------------

    def forward(self, x, train: bool = True) -> np.ndarray:
        """Run the network on a batch ``(N, *input_shape)``.

        With ``train=True`` every layer caches what its backward needs.
        """
        if isinstance(x, Tensor):
            x = x.data
        x = np.asarray(x, dtype=DTYPE)
        if x.shape[1:] != self.input_shape:
            raise ConfigurationError(
                f"{self.name}: input layer expects per-sample shape {self.input_shape}, got {x.shape[1:]}"
            )
        for layer in self.layers:
            x = layer.forward(x, train=train)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"{self.name}: non-finite values in forward output")
        self._forwarded = train
        return x

    __call__ = forward

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        """Inference in chunks, without caching."""
        x = np.asarray(x, dtype=DTYPE)
        if len(x) == 0:
            return np.zeros((0,) + self.output_shape, dtype=DTYPE)
        return np.concatenate([self.forward(x[i:i + batch_size], train=False)
                               for i in range(0, len(x), batch_size)])

    def backward(self, dy, input_grad: bool = True):
        """Backpropagate ``dy`` (gradient w.r.t. the last forward's output).

        Returns the gradient w.r.t. the input, or None when ``input_grad``
        is false. Parameter gradients are overwritten, not accumulated.
        """
        if not self._forwarded:
            raise StateError(f"{self.name}: backward called before a training forward pass")
        dy = np.asarray(dy, dtype=DTYPE)
        if dy.shape[1:] != self.output_shape:
            raise ConfigurationError(
                f"{self.name}: loss gradient shape {dy.shape[1:]} does not match output {self.output_shape}"
            )
        if not self.trainable:
            self.zero_grad()
        # Stop early once neither input nor parameter gradients are needed below.
        lowest = 0
        if not input_grad:
            if self.trainable:
                lowest = next((i for i, l in enumerate(self.layers) if l.params), len(self.layers))
            else:
                lowest = len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if i < lowest:
                layer._cache = None
                continue
            need_dx = input_grad or i > lowest
            dy = layer.backward(dy, param_grads=self.trainable, input_grad=need_dx)
        self._forwarded = False
        return dy if input_grad else None

    def assert_finite(self) -> None:
        for name, p in self.named_parameters():
            if not np.all(np.isfinite(p.data)):
                raise NumericError(f"{self.name}: parameter {name} became non-finite")

    def __repr__(self) -> str:
        kinds = ", ".join(s.kind for s in self.specs)
        return f"Network({self.name!r}, in={self.input_shape}, out={self.output_shape}, [{kinds}])"
