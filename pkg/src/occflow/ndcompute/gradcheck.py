"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Network
from .tensor import DTYPE


@dataclass
class GradCheckReport:
    tolerance: float
    discrepancies: dict = field(default_factory=dict)  # layer label -> max relative discrepancy

    @property
    def failed(self) -> list[str]:
        return [k for k, v in self.discrepancies.items() if not v <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed

    @property
    def worst(self) -> float:
        return max(self.discrepancies.values(), default=0.0)

    def __str__(self) -> str:
        lines = [f"{k:<28} {v:.3e} {'ok' if v <= self.tolerance else 'FAIL'}"
                 for k, v in self.discrepancies.items()]
        return "\n".join(lines)


def _relative(analytic, numeric):
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    if scale < 1e-300:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def grad_check(net: Network, x, tolerance: float = 1e-4, h: float = 1e-5,
               rng: np.random.Generator | None = None, max_per_tensor: int | None = None,
               check_input: bool = True) -> GradCheckReport:
    """Compare backprop gradients to central differences, layer by layer.

    The scalar probed is ``sum(output * R)`` for a fixed random ``R``, so
    every output element contributes. Discrepancy per tensor is the max
    absolute error divided by the larger of the two gradients' max-norms.
    """
    rng = rng or np.random.default_rng(0)
    x = np.array(x, dtype=DTYPE)
    proj = rng.standard_normal((x.shape[0],) + net.output_shape)

    def loss(inp):
        return float(np.sum(net.forward(inp, train=False) * proj))

    net.forward(x, train=True)
    dx = net.backward(proj, input_grad=True)
    report = GradCheckReport(tolerance)

    for layer in net.layers:
        worst = None
        for key, p in layer.params.items():
            if p.grad is None:
                continue
            flat = p.data.reshape(-1)
            idx = np.arange(flat.size)
            if max_per_tensor is not None and flat.size > max_per_tensor:
                idx = rng.choice(flat.size, max_per_tensor, replace=False)
            numeric = np.empty(len(idx))
            for j, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + h
                up = loss(x)
                flat[i] = orig - h
                down = loss(x)
                flat[i] = orig
                numeric[j] = (up - down) / (2 * h)
            d = _relative(p.grad.reshape(-1)[idx], numeric)
            worst = d if worst is None else max(worst, d)
        if worst is not None:
            report.discrepancies[f"layer {layer.index} ({layer.spec.kind})"] = worst

    if check_input:
        flat = x.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            idx = rng.choice(flat.size, max_per_tensor, replace=False)
        numeric = np.empty(len(idx))
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            up = loss(x)
            flat[i] = orig - h
            down = loss(x)
            flat[i] = orig
            numeric[j] = (up - down) / (2 * h)
        report.discrepancies["input"] = _relative(dx.reshape(-1)[idx], numeric)
    return report
