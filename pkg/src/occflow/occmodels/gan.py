"""Adversarial generator training with a feature-matching term.

IO-GEN matches the batch-mean DSVDD encoding of generated stacks to the
center ``c``. The GEN baseline instead matches the batch-mean of the
discriminator's final hidden layer to that of real stacks. Everything
else (networks, schedule, noise prior) is shared.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import GanConfig
from ..errors import NumericError
from ..ndcompute import Adam, ModelBundle, Network, bce, squared_distance
from ..ndcompute.losses import BCE_EPS
from .architectures import GENERATOR_DECODER_OFFSET, build_discriminator, build_generator
from .common import check_finite
from .dcae import DcaeModel
from .dsvdd import HypersphereDescription

log = logging.getLogger(__name__)


@dataclass
class GeneratorModel:
    """Generator plus its discriminator (body and sigmoid head)."""

    kind: str  # "iogen" or "gen"
    generator: Network
    disc_body: Network
    disc_head: Network
    sigma: float
    feature_weight: float
    history: list = field(default_factory=list)

    @property
    def noise_dim(self) -> int:
        return self.generator.input_shape[0]

    def noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(0.0, self.sigma, size=(n, self.noise_dim))

    def generate(self, z, batch_size: int = 32) -> np.ndarray:
        return self.generator.predict(z, batch_size)

    def sample(self, rng: np.random.Generator, n: int, batch_size: int = 32) -> np.ndarray:
        return self.generate(self.noise(rng, n), batch_size)

    def discriminate(self, x, batch_size: int = 64) -> np.ndarray:
        return self.disc_head.predict(self.disc_body.predict(x, batch_size), batch_size)[:, 0]

    def to_bundle(self) -> ModelBundle:
        return ModelBundle(
            self.kind,
            {"generator": self.generator, "disc_body": self.disc_body, "disc_head": self.disc_head},
            attrs={"sigma": self.sigma, "feature_weight": self.feature_weight, "history": self.history},
        )

    @classmethod
    def from_bundle(cls, b: ModelBundle) -> "GeneratorModel":
        n = b.networks
        return cls(b.kind, n["generator"], n["disc_body"], n["disc_head"], b.attrs["sigma"],
                   b.attrs["feature_weight"], b.attrs.get("history", []))


def init_generator(dcae: DcaeModel, noise_dim: int, rng: np.random.Generator, widths) -> Network:
    """Dense+ReLU from noise to 8x8x32, then a copy of the pretrained decoder."""
    gen = build_generator(dcae.channels, widths, noise_dim).init(rng)
    for g_layer, d_layer in zip(gen.layers[GENERATOR_DECODER_OFFSET:], dcae.decoder.layers):
        for key, p in d_layer.params.items():
            g_layer.params[key].data = p.data.copy()
    return gen


def _adversarial_grad(p, mode):
    """Loss and d(loss)/dp for the generator's adversarial term, averaged over the batch."""
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    if mode == "saturating":
        # minimize E[log(1 - D(G(z)))]
        return float(np.mean(np.log(1.0 - p))), -1.0 / (1.0 - p) / p.size
    # minimize -E[log D(G(z))]
    return float(-np.mean(np.log(p))), -1.0 / p / p.size


def train_generator(kind: str, dcae: DcaeModel, dsvdd: HypersphereDescription, x, config: GanConfig,
                    rng: np.random.Generator, widths) -> GeneratorModel:
    """Alternate discriminator and generator updates.

    The discriminator ascends ``log D(x) + log(1 - D(G(z)))``; the generator
    descends ``L_adv + feature_weight * ||mean f(G(z)) - target||^2`` where
    ``f``/``target`` are the frozen DSVDD encoder and ``c`` for ``kind="iogen"``,
    or the discriminator body and its mean on the real batch for ``kind="gen"``.
    The DSVDD encoder is only ever run frozen.
    """
    if kind not in ("iogen", "gen"):
        raise ValueError(kind)
    x = np.asarray(x, dtype=np.float64)
    channels = x.shape[-1]
    G = init_generator(dcae, config.noise_dim, rng, widths)
    body, head = build_discriminator(channels, widths)
    body.init(rng)
    head.init(rng)
    phi = dsvdd.encoder.copy("phi")
    phi.trainable = False
    center = dsvdd.center
    opt_g = Adam(G.parameters(), config.learning_rate_g, config.beta1, config.beta2)
    opt_d = Adam(body.parameters() + head.parameters(), config.learning_rate_d, config.beta1, config.beta2)
    model = GeneratorModel(kind, G, body, head, config.sigma, config.feature_weight)
    eval_rng = np.random.default_rng(rng.integers(2**63))
    z_eval = model.noise(eval_rng, config.eval_samples)
    bs = config.batch_size
    steps = config.steps_per_epoch or max(1, math.ceil(len(x) / bs))
    lam = config.feature_weight
    low_var_streak = 0
    history = []

    for epoch in range(1, config.epochs + 1):
        sums = {"d_loss": 0.0, "g_adv": 0.0, "g_fm": 0.0}
        for _ in range(steps):
            for _ in range(config.d_steps):
                real = x[rng.choice(len(x), size=min(bs, len(x)), replace=False)]
                fake = G.forward(model.noise(rng, len(real)), train=False)
                batch = np.concatenate([real, fake])
                labels = np.concatenate([np.ones(len(real)), np.zeros(len(fake))])[:, None]
                p = head.forward(body.forward(batch))
                d_loss, grad = bce(p, labels)
                check_finite(d_loss, f"{kind} discriminator loss (epoch {epoch})")
                body.backward(head.backward(grad), input_grad=False)
                opt_d.step()
            sums["d_loss"] += d_loss

            for _ in range(config.g_steps):
                z = model.noise(rng, bs)
                fake = G.forward(z)
                with body.frozen(), head.frozen():
                    if kind == "gen":
                        # real-batch statistics first: an inference pass would drop the cached state
                        target = body.forward(x[rng.choice(len(x), size=min(bs, len(x)), replace=False)],
                                              train=False).mean(axis=0)
                    h = body.forward(fake)
                    p = head.forward(h)
                    adv, dp = _adversarial_grad(p, config.adversarial_loss)
                    dh = head.backward(dp)
                    if kind == "gen":
                        diff = h.mean(axis=0) - target
                        fm = float(diff @ diff)
                        dh = dh + lam * 2.0 * diff / len(h)
                    dfake = body.backward(dh)
                if kind == "iogen":
                    f = phi.forward(fake)
                    diff = f.mean(axis=0) - center
                    fm = float(diff @ diff)
                    dfake = dfake + phi.backward(np.broadcast_to(lam * 2.0 * diff / len(f), f.shape))
                check_finite(adv + lam * fm, f"{kind} generator loss (epoch {epoch})")
                G.backward(dfake, input_grad=False)
                opt_g.step()
            sums["g_adv"] += adv
            sums["g_fm"] += fm

        gen_eval = model.generate(z_eval)
        pixel_var = float(gen_eval.var(axis=0).mean())
        row = {"epoch": epoch, **{k: v / steps for k, v in sums.items()},
               "gen_mean_dist": float(squared_distance(phi.predict(gen_eval), center).mean()),
               "pixel_var": pixel_var}
        history.append(row)
        log.info("%s epoch %d: d %.4f adv %.4f fm %.5f dist %.5f var %.2e", kind, epoch, row["d_loss"],
                 row["g_adv"], row["g_fm"], row["gen_mean_dist"], pixel_var)
        low_var_streak = low_var_streak + 1 if pixel_var < config.collapse_threshold else 0
        if low_var_streak >= config.collapse_patience:
            raise NumericError(f"{kind}: mode collapse, generated pixel variance {pixel_var:.2e} "
                               f"below {config.collapse_threshold} for {low_var_streak} evaluations")
    G.assert_finite()
    body.assert_finite()
    head.assert_finite()
    model.history = history
    return model


def train_iogen(dsvdd: HypersphereDescription, dcae: DcaeModel, x, config: GanConfig,
                rng: np.random.Generator, widths) -> GeneratorModel:
    """Train the inner-outlier generator (feature matching toward ``c``)."""
    return train_generator("iogen", dcae, dsvdd, x, config, rng, widths)
