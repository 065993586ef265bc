"""Minimal differentiable substrate: layers, networks, Adam, gradient checks."""

from .gradcheck import GradCheckReport, grad_check
from .layers import LayerSpec, activation, avgpool1d, conv1d, conv2d, dense, flatten, maxpool2d, reshape, upsample2d
from .losses import bce, mse, squared_distance
from .network import Network
from .optim import Adam, OptimizerState, adam_step
from .serialize import ModelBundle
from .tensor import DTYPE, Tensor

__all__ = [
    "Adam", "DTYPE", "GradCheckReport", "LayerSpec", "ModelBundle", "Network", "OptimizerState",
    "Tensor", "activation", "adam_step", "avgpool1d", "bce", "conv1d", "conv2d", "dense", "flatten",
    "grad_check", "maxpool2d", "mse", "reshape", "squared_distance", "upsample2d",
]
