"""Parameter tensors with an optional gradient buffer."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError

DTYPE = np.float64


class Tensor:
    """Dense float64 array plus an optional gradient of the same shape.

    Activations flow through networks as plain ndarrays; ``Tensor`` is used
    for trainable parameters, where the gradient buffer matters.
    """

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str = "", grad=None):
        self.data = np.ascontiguousarray(data, dtype=DTYPE)
        self.name = name
        self.grad = None
        if grad is not None:
            self.set_grad(grad)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def set_grad(self, grad) -> None:
        grad = np.asarray(grad, dtype=DTYPE)
        if grad.shape != self.data.shape:
            raise ConfigurationError(
                f"gradient shape {grad.shape} does not match parameter {self.name} {self.data.shape}"
            )
        self.grad = grad

    def zero_grad(self) -> None:
        self.grad = None

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), name=self.name)

    def __repr__(self) -> str:
        g = "" if self.grad is None else ", grad"
        return f"Tensor({self.name!r}, shape={self.shape}{g})"
