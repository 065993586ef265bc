"""One-class deep SVDD on top of the pretrained encoder."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import DsvddConfig
from ..errors import ConfigurationError, NumericError
from ..ndcompute import Adam, ModelBundle, Network, squared_distance
from .common import batches, check_finite

log = logging.getLogger(__name__)


@dataclass
class HypersphereDescription:
    """The fixed center ``c`` and the encoder trained to pull stable data toward it."""

    center: np.ndarray
    encoder: Network
    weight_decay: float
    history: list = field(default_factory=list)

    def encode(self, x, batch_size=64) -> np.ndarray:
        return self.encoder.predict(x, batch_size)

    def score(self, x, batch_size=64) -> np.ndarray:
        return svdd_score(self.encoder, self.center, x, batch_size)

    def to_bundle(self) -> ModelBundle:
        return ModelBundle("dsvdd", {"encoder": self.encoder}, {"center": self.center},
                           {"weight_decay": self.weight_decay, "history": self.history})

    @classmethod
    def from_bundle(cls, b: ModelBundle) -> "HypersphereDescription":
        return cls(b.arrays["center"], b.networks["encoder"], b.attrs["weight_decay"], b.attrs.get("history", []))


def init_center(encoder: Network, x, eps: float = 0.01, return_encodings: bool = False):
    """Mean encoding of the stable-train stacks, pushed at least ``eps`` away from zero per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ConfigurationError("cannot initialize the center from an empty training set")
    enc = encoder.predict(x)
    c = enc.mean(axis=0)
    small = np.abs(c) < eps
    c[small] = np.where(c[small] < 0, -eps, eps)
    return (c, enc) if return_encodings else c


def svdd_score(encoder: Network, center, x, batch_size: int = 64) -> np.ndarray:
    """``||phi(x) - c||^2`` per sample."""
    return squared_distance(encoder.predict(x, batch_size), center)


def weight_norm(encoder: Network) -> float:
    return float(sum(np.sum(w.data ** 2) for w in encoder.weights()))


def train_dsvdd(encoder: Network, center, x, config: DsvddConfig, rng: np.random.Generator,
                initial_encodings=None) -> HypersphereDescription:
    """Minimize mean ``||phi(x) - c||^2 + (lambda/2) sum ||W||_F^2`` over the encoder weights.

    ``encoder`` is copied; ``center`` is never modified. History rows hold
    the full-pass mean squared distance and weight norm after each epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    center = np.array(center, dtype=np.float64)
    center.setflags(write=False)
    enc = encoder.copy("encoder")
    enc.trainable = True
    opt = Adam(enc.parameters(), config.learning_rate, config.beta1, config.beta2)
    lam = config.weight_decay

    def epoch_stats(epoch, encodings=None):
        d = squared_distance(enc.predict(x) if encodings is None else encodings, center)
        if len(d) > 1 and np.var(d) < config.collapse_variance:
            raise NumericError(f"hypersphere collapse at epoch {epoch}: distance variance {np.var(d):.3e}")
        return {"epoch": epoch, "mean_dist": float(d.mean()), "weight_norm": weight_norm(enc)}

    history = [epoch_stats(0, initial_encodings)]
    for epoch in range(1, config.epochs + 1):
        for idx in batches(rng, len(x), config.batch_size):
            f = enc.forward(x[idx])
            diff = f - center
            loss = float(np.mean(np.einsum("ij,ij->i", diff, diff)))
            check_finite(loss, f"DSVDD loss (epoch {epoch})")
            enc.backward(2.0 * diff / len(idx), input_grad=False)
            for w in enc.weights():
                w.grad = w.grad + lam * w.data
            opt.step()
        history.append(epoch_stats(epoch))
        log.info("dsvdd epoch %d: mean dist %.6f", epoch, history[-1]["mean_dist"])
    enc.assert_finite()
    return HypersphereDescription(np.array(center), enc, lam, history)
