"""Deep convolutional autoencoder: the pretrained backbone."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import DcaeConfig
from ..ndcompute import Adam, ModelBundle, Network, mse
from .architectures import PAPER_WIDTHS, build_decoder, build_encoder
from .common import batches, check_finite

log = logging.getLogger(__name__)


@dataclass
class DcaeModel:
    encoder: Network
    decoder: Network
    history: list = field(default_factory=list)

    @property
    def channels(self) -> int:
        return self.encoder.input_shape[-1]

    def encode(self, x, batch_size=64) -> np.ndarray:
        return self.encoder.predict(x, batch_size)

    def reconstruct(self, x, batch_size=32) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = [self.decoder.forward(self.encoder.forward(x[i:i + batch_size], train=False), train=False)
               for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros_like(x)

    def to_bundle(self) -> ModelBundle:
        return ModelBundle("dcae", {"encoder": self.encoder, "decoder": self.decoder}, attrs={"history": self.history})

    @classmethod
    def from_bundle(cls, b: ModelBundle) -> "DcaeModel":
        return cls(b.networks["encoder"], b.networks["decoder"], b.attrs.get("history", []))


def init_dcae(channels, rng, widths=PAPER_WIDTHS) -> DcaeModel:
    # Encoder kernels carry no bias so the DSVDD fine-tune cannot collapse onto a constant.
    enc = build_encoder(channels, widths, bias=False).init(rng)
    dec = build_decoder(channels, widths).init(rng)
    return DcaeModel(enc, dec)


def _val_mse(model, x):
    if len(x) == 0:
        return float("nan")
    return float(np.mean((model.reconstruct(x) - x) ** 2))


def train_dcae(x, config: DcaeConfig, rng: np.random.Generator, widths=PAPER_WIDTHS) -> DcaeModel:
    """Fit the autoencoder to stable-train stacks ``(N, 64, 64, 2m)`` by MSE.

    A ``val_fraction`` slice is held out; the history records its MSE before
    training (epoch 0) and after every epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    model = init_dcae(x.shape[-1], rng, widths)
    n_val = int(round(len(x) * config.val_fraction)) if len(x) > 1 else 0
    perm = rng.permutation(len(x))
    val, train = x[perm[:n_val]], x[perm[n_val:]]
    opt = Adam(model.encoder.parameters() + model.decoder.parameters(),
               config.learning_rate, config.beta1, config.beta2)
    history = [{"epoch": 0, "train_mse": float("nan"), "val_mse": _val_mse(model, val)}]
    for epoch in range(1, config.epochs + 1):
        total, count = 0.0, 0
        for idx in batches(rng, len(train), config.batch_size):
            xb = train[idx]
            z = model.encoder.forward(xb)
            y = model.decoder.forward(z)
            loss, grad = mse(y, xb)
            check_finite(loss, f"DCAE loss (epoch {epoch})")
            model.encoder.backward(model.decoder.backward(grad), input_grad=False)
            opt.step()
            total += loss * len(idx)
            count += len(idx)
        row = {"epoch": epoch, "train_mse": total / count, "val_mse": _val_mse(model, val)}
        history.append(row)
        log.info("dcae epoch %d: train %.5f val %.5f", epoch, row["train_mse"], row["val_mse"])
    model.encoder.assert_finite()
    model.decoder.assert_finite()
    model.history = history
    return model
