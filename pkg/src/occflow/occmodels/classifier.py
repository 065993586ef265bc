"""Label-switch classifier over DSVDD features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import ClassifierConfig
from ..ndcompute import Adam, ModelBundle, Network, bce
from .architectures import CLASSIFIER_FILTERS, build_classifier
from .common import batches, check_finite, check_normalized
from .dsvdd import HypersphereDescription

log = logging.getLogger(__name__)

UNSTABLE = 1.0
STABLE = 0.0


@dataclass
class ClassifierModel:
    network: Network
    source: str = "iogen"  # which synthetic features it was trained against
    history: list = field(default_factory=list)

    def likelihood(self, features, batch_size: int = 256) -> np.ndarray:
        """Predicted likelihood of the unstable state for DSVDD features ``(N, 2048)``."""
        return self.network.predict(features, batch_size)[:, 0]

    def to_bundle(self) -> ModelBundle:
        return ModelBundle("classifier", {"classifier": self.network},
                           attrs={"source": self.source, "history": self.history})

    @classmethod
    def from_bundle(cls, b: ModelBundle) -> "ClassifierModel":
        return cls(b.networks["classifier"], b.attrs.get("source", "iogen"), b.attrs.get("history", []))


def init_classifier(rng: np.random.Generator, zero_head: bool = False) -> Network:
    net = build_classifier(CLASSIFIER_FILTERS).init(rng)
    if zero_head:
        for p in net.layers[-2].params.values():
            p.data[...] = 0.0
    return net


def train_label_switch(real_features, synthetic_features, config: ClassifierConfig,
                       rng: np.random.Generator, source: str = "iogen") -> ClassifierModel:
    """Binary cross-entropy with switched labels.

    Real stable features are labelled unstable (1) and synthetic features
    stable (0). Each batch holds equal numbers of both; an epoch is one pass
    over the real features, with synthetic ones drawn from the pool.
    """
    real = np.asarray(real_features, dtype=np.float64)
    synth = np.asarray(synthetic_features, dtype=np.float64)
    net = init_classifier(rng)
    opt = Adam(net.parameters(), config.learning_rate, config.beta1, config.beta2)
    half = max(1, config.batch_size // 2)
    history = []
    for epoch in range(1, config.epochs + 1):
        total, steps = 0.0, 0
        for idx in batches(rng, len(real), half):
            fake = synth[rng.choice(len(synth), size=len(idx), replace=len(synth) < len(idx))]
            xb = np.concatenate([real[idx], fake])
            yb = np.concatenate([np.full(len(idx), UNSTABLE), np.full(len(fake), STABLE)])[:, None]
            loss, grad = bce(net.forward(xb), yb)
            check_finite(loss, f"classifier loss (epoch {epoch})")
            net.backward(grad, input_grad=False)
            opt.step()
            total += loss
            steps += 1
        history.append({"epoch": epoch, "bce": total / steps})
        log.info("classifier[%s] epoch %d: bce %.5f", source, epoch, total / steps)
    net.assert_finite()
    return ClassifierModel(net, source, history)


def synthetic_features(dsvdd: HypersphereDescription, generator, rng: np.random.Generator, n: int) -> np.ndarray:
    """``phi(G(z))`` for ``n`` fresh noise draws."""
    return dsvdd.encode(generator.sample(rng, n))


def train_classifier(dsvdd: HypersphereDescription, iogen, x_train, config: ClassifierConfig,
                     rng: np.random.Generator) -> ClassifierModel:
    """Label-switch classifier against IO-GEN inner outliers."""
    real = dsvdd.encode(x_train)
    pool = config.synthetic_pool or 2 * len(real)
    return train_label_switch(real, synthetic_features(dsvdd, iogen, rng, pool), config, rng, iogen.kind)


def predict(dsvdd: HypersphereDescription, classifier: ClassifierModel, x) -> np.ndarray:
    """Likelihood of the unstable state for normalized stacks."""
    x = check_normalized(x)
    return classifier.likelihood(dsvdd.encode(x))
