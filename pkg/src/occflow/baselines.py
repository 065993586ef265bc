"""Comparison methods: OFW and DCAE thresholding, OC-SVM, GEN and N-GEN.

Every method reduces a stack to one scalar where higher means more
abnormal, so evaluation can treat all of them alike.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import ClassifierConfig, GanConfig, NgenConfig, OcsvmConfig
from .errors import ConfigurationError, NumericError
from .flowdata.weights import stack_weights
from .ndcompute import ModelBundle
from .occmodels import (
    DcaeModel,
    GeneratorModel,
    HypersphereDescription,
    synthetic_features,
    train_generator,
    train_label_switch,
)

log = logging.getLogger(__name__)


# -- threshold baselines -------------------------------------------------------


@dataclass(frozen=True)
class ThresholdModel:
    score_id: str  # "ofw" or "dcae_error"
    higher_is_abnormal: bool = True


def ofw_score(raw_stacks) -> np.ndarray:
    """Mean optical flow weight over each stack's frames (raw, unnormalized flow)."""
    raw = np.asarray(raw_stacks, dtype=np.float64)
    if raw.ndim == 3:
        raw = raw[None]
    return stack_weights(raw)


def dcae_error_score(dcae: DcaeModel, x) -> np.ndarray:
    """Per-stack reconstruction MSE."""
    x = np.asarray(x, dtype=np.float64)
    recon = dcae.reconstruct(x)
    return ((recon - x) ** 2).reshape(len(x), -1).mean(axis=1)


# -- one-class SVM -------------------------------------------------------------


def rbf_gamma(features) -> float:
    var = float(np.var(features))
    if not var > 0:
        raise NumericError("degenerate kernel: training features have zero variance")
    return 1.0 / (features.shape[1] * var)


def kernel_matrix(a, b, kernel: str, gamma: float | None) -> np.ndarray:
    if kernel == "linear":
        return a @ b.T
    sq = np.sum(a**2, axis=1)[:, None] + np.sum(b**2, axis=1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class OcSvmModel:
    nu: float
    kernel: str
    gamma: float | None
    support: np.ndarray  # support vectors
    coef: np.ndarray  # their dual coefficients (sum to 1)
    rho: float

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise ConfigurationError(f"nu must lie in (0, 1], got {self.nu}")

    def decision_function(self, features) -> np.ndarray:
        """Positive inside the estimated support, negative outside."""
        k = kernel_matrix(np.asarray(features, dtype=np.float64), self.support, self.kernel, self.gamma)
        out = k @ self.coef - self.rho
        if not np.all(np.isfinite(out)):
            raise NumericError("OC-SVM decision value is not finite")
        return out

    def score(self, features) -> np.ndarray:
        return -self.decision_function(features)

    def to_bundle(self) -> ModelBundle:
        return ModelBundle("ocsvm", arrays={"support": self.support, "coef": self.coef},
                           attrs={"nu": self.nu, "kernel": self.kernel, "gamma": self.gamma, "rho": self.rho})

    @classmethod
    def from_bundle(cls, b: ModelBundle) -> "OcSvmModel":
        a = b.attrs
        return cls(a["nu"], a["kernel"], a["gamma"], b.arrays["support"], b.arrays["coef"], a["rho"])


def solve_ocsvm_dual(K: np.ndarray, nu: float, tol: float = 1e-6, max_iter: int = 100000):
    """Minimize ``a'Ka / 2`` subject to ``0 <= a_i <= 1/(nu n)`` and ``sum(a) = 1``.

    Pairwise coordinate ascent on the maximal violating pair, as in SMO.
    Returns ``(alpha, rho)``.
    """
    n = K.shape[0]
    if n == 0 or not np.all(np.isfinite(K)):
        raise NumericError("degenerate kernel matrix")
    C = 1.0 / (nu * n)
    alpha = np.zeros(n)
    full = int(np.floor(nu * n))
    alpha[:full] = C
    if full < n:
        alpha[full] = 1.0 - C * full
    G = K @ alpha
    diag = np.diag(K)
    for _ in range(max_iter):
        up = alpha < C - 1e-15
        down = alpha > 1e-15
        if not up.any() or not down.any():
            break  # nu = 1 pins every coefficient at the bound
        i = np.flatnonzero(up)[np.argmin(G[up])]
        j = np.flatnonzero(down)[np.argmax(G[down])]
        if G[j] - G[i] <= tol:
            break
        curv = max(diag[i] + diag[j] - 2.0 * K[i, j], 1e-12)
        delta = min((G[j] - G[i]) / curv, C - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        G += delta * (K[:, i] - K[:, j])
    else:
        log.warning("OC-SVM solver hit max_iter=%d before converging", max_iter)
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    if free.any():
        rho = float(G[free].mean())
    else:
        lo = G[alpha <= 1e-12].min(initial=np.inf)
        hi = G[alpha >= C - 1e-12].max(initial=-np.inf)
        rho = float((lo + hi) / 2) if np.isfinite(lo) and np.isfinite(hi) else float(G.mean())
    return alpha, rho


def fit_ocsvm(features, nu: float, kernel: str = "rbf", gamma: float | None = None,
              tol: float = 1e-6, max_iter: int = 100000) -> OcSvmModel:
    features = np.asarray(features, dtype=np.float64)
    if kernel == "rbf" and gamma is None:
        gamma = rbf_gamma(features)
    K = kernel_matrix(features, features, kernel, gamma)
    alpha, rho = solve_ocsvm_dual(K, nu, tol, max_iter)
    sv = alpha > 1e-12
    return OcSvmModel(nu, kernel, gamma, features[sv].copy(), alpha[sv].copy(), rho)


def train_ocsvm(encoder, x_train, config: OcsvmConfig) -> list[OcSvmModel]:
    """One model per nu in the grid, on pretrained-encoder features of stable-train stacks.

    The caller picks the nu with the best test AUC, as the comparison protocol does.
    """
    features = encoder.predict(x_train)
    return [fit_ocsvm(features, nu, config.kernel, config.gamma, config.tol, config.max_iter)
            for nu in config.nu_grid]


# -- generative baselines ------------------------------------------------------


def train_gen(dcae: DcaeModel, dsvdd: HypersphereDescription, x_train, gan_config: GanConfig,
              clf_config: ClassifierConfig, rng: np.random.Generator, widths):
    """GEN: feature matching on the discriminator's last hidden layer, then a label-switch classifier."""
    gen = train_generator("gen", dcae, dsvdd, x_train, gan_config, rng, widths)
    clf = train_gen_classifier(dsvdd, gen, x_train, clf_config, rng)
    return gen, clf


def train_gen_classifier(dsvdd, gen: GeneratorModel, x_train, config: ClassifierConfig, rng):
    real = dsvdd.encode(x_train)
    pool = config.synthetic_pool or 2 * len(real)
    return train_label_switch(real, synthetic_features(dsvdd, gen, rng, pool), config, rng, "gen")


@dataclass(frozen=True)
class NGenNoise:
    alpha: float
    dim: int = 2048

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"N-GEN alpha must be positive, got {self.alpha}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(0.0, self.alpha, size=(n, self.dim))


def ngen_alpha(features, statistic: str = "std") -> float:
    """Global variation of encodings: per-feature variance pooled over features."""
    pooled_var = float(np.mean(np.var(features, axis=0)))
    return float(np.sqrt(pooled_var)) if statistic == "std" else pooled_var


def train_ngen(dsvdd: HypersphereDescription, x_train, ngen_config: NgenConfig, clf_config: ClassifierConfig,
               rng: np.random.Generator, generator: GeneratorModel | None = None):
    """N-GEN: the label-switch classifier against i.i.d. Gaussian features."""
    real = dsvdd.encode(x_train)
    if ngen_config.alpha_source == "generator":
        if generator is None:
            raise ConfigurationError("ngen.alpha_source='generator' needs a trained generator")
        ref = synthetic_features(dsvdd, generator, rng, len(real))
    else:
        ref = real
    noise = NGenNoise(ngen_alpha(ref, ngen_config.alpha_statistic), real.shape[1])
    pool = clf_config.synthetic_pool or 2 * len(real)
    clf = train_label_switch(real, noise.sample(rng, pool), clf_config, rng, "ngen")
    return noise, clf
