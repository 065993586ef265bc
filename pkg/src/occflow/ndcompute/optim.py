"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError, StateError
from .tensor import Tensor


@dataclass
class OptimizerState:
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    first_moments: list = field(default_factory=list)
    second_moments: list = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")


def adam_step(params: list[Tensor], state: OptimizerState) -> OptimizerState:
    """Apply one Adam update in place, using each parameter's ``grad``."""
    missing = [p.name for p in params if p.grad is None]
    if missing:
        raise StateError(f"adam_step: no gradient for {', '.join(missing[:5])}")
    if not state.first_moments:
        state.first_moments = [np.zeros_like(p.data) for p in params]
        state.second_moments = [np.zeros_like(p.data) for p in params]
    elif len(state.first_moments) != len(params):
        raise StateError("adam_step: optimizer state does not match the parameter list")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for p, m, v in zip(params, state.first_moments, state.second_moments):
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
        if not np.all(np.isfinite(update)):
            raise NumericError(f"adam_step: non-finite update for {p.name} at step {state.step}")
        p.data -= update
    return state


class Adam:
    """Binds a parameter list to an :class:`OptimizerState`."""

    def __init__(self, params, learning_rate=1e-4, beta1=0.5, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        self.state = OptimizerState(learning_rate, beta1, beta2, epsilon)

    def step(self) -> None:
        adam_step(self.params, self.state)
