"""Run configuration: one JSON document, overridable through ``OCCFLOW_*`` variables.

Nested keys use a double underscore in the variable name, so
``OCCFLOW_DCAE__EPOCHS=5`` sets ``dcae.epochs``. Values are parsed as JSON
when possible and kept as strings otherwise.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError

ENV_PREFIX = "OCCFLOW_"


@dataclass
class DcaeConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    val_fraction: float = 0.1


@dataclass
class DsvddConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    weight_decay: float = 1e-6
    center_eps: float = 0.01
    collapse_variance: float = 1e-12


@dataclass
class GanConfig:
    epochs: int = 200
    steps_per_epoch: int | None = None  # default: ceil(n_train / batch_size)
    batch_size: int = 64
    learning_rate_g: float = 1e-4
    learning_rate_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    noise_dim: int = 100
    sigma: float = 1.0
    feature_weight: float = 10.0
    d_steps: int = 1
    g_steps: int = 1
    adversarial_loss: str = "saturating"  # or "non_saturating"
    collapse_threshold: float = 1e-6
    collapse_patience: int = 5
    eval_samples: int = 64


@dataclass
class ClassifierConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    synthetic_pool: int | None = None  # default: 2 * n_train fresh generator draws


@dataclass
class NgenConfig:
    alpha_source: str = "stable_encodings"  # or "generator"
    alpha_statistic: str = "std"  # or "variance"


@dataclass
class OcsvmConfig:
    nu_grid: list = field(default_factory=lambda: [0.01, 0.05, 0.1, 0.2, 0.5])
    kernel: str = "rbf"
    gamma: float | None = None  # default: 1 / (n_features * feature variance)
    tol: float = 1e-6
    max_iter: int = 100000


@dataclass
class EvalConfig:
    windows: list = field(default_factory=lambda: [[1, 2], [2, 4], [4, 6], [6, 10], [10, 18]])
    hist_max_bins: int = 50
    significance: float = 0.05


@dataclass
class SeedConfig:
    split: int = 0
    init: int = 0
    noise: int = 0


@dataclass
class RunConfig:
    dataset_root: str | None = None
    out_dir: str = "occflow-out"
    m: int = 2
    widths: list = field(default_factory=lambda: [32, 64, 128])
    split_mode: str = "random"
    seeds: SeedConfig = field(default_factory=SeedConfig)
    scenario: dict | None = None
    dcae: DcaeConfig = field(default_factory=DcaeConfig)
    dsvdd: DsvddConfig = field(default_factory=DsvddConfig)
    iogen: GanConfig = field(default_factory=GanConfig)
    gen: GanConfig = field(default_factory=GanConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    ngen: NgenConfig = field(default_factory=NgenConfig)
    ocsvm: OcsvmConfig = field(default_factory=OcsvmConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    ablation_m: list = field(default_factory=lambda: [1, 2, 4])

    def __post_init__(self):
        if self.m <= 0:
            raise ConfigurationError("m must be positive")
        if len(self.widths) != 3 or any(int(w) <= 0 for w in self.widths):
            raise ConfigurationError("widths must be three positive kernel counts")
        if self.split_mode not in ("random", "chronological"):
            raise ConfigurationError(f"unknown split_mode {self.split_mode!r}")
        for gan in (self.iogen, self.gen):
            if gan.adversarial_loss not in ("saturating", "non_saturating"):
                raise ConfigurationError(f"unknown adversarial_loss {gan.adversarial_loss!r}")
            if gan.sigma <= 0 or gan.feature_weight < 0:
                raise ConfigurationError("sigma must be positive and feature_weight non-negative")
        if self.ngen.alpha_source not in ("stable_encodings", "generator"):
            raise ConfigurationError(f"unknown ngen.alpha_source {self.ngen.alpha_source!r}")
        if self.ngen.alpha_statistic not in ("std", "variance"):
            raise ConfigurationError(f"unknown ngen.alpha_statistic {self.ngen.alpha_statistic!r}")
        if self.ocsvm.kernel not in ("rbf", "linear"):
            raise ConfigurationError(f"unknown ocsvm.kernel {self.ocsvm.kernel!r}")
        if any(not 0 < nu <= 1 for nu in self.ocsvm.nu_grid):
            raise ConfigurationError("every nu must lie in (0, 1]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self, exclude=("out_dir",)) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in exclude}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def section_digest(self, *sections: str) -> str:
        d = self.to_dict()
        core = {k: d[k] for k in ("m", "widths", "seeds", "split_mode")}
        core.update({k: d[k] for k in sections})
        return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def _build(cls, data, path=""):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown config keys at {path or 'top level'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _nested_type(cls, name)
        kwargs[name] = _build(sub, value, f"{path}{name}.") if sub and value is not None else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


_NESTED = {
    "seeds": SeedConfig, "dcae": DcaeConfig, "dsvdd": DsvddConfig, "iogen": GanConfig, "gen": GanConfig,
    "classifier": ClassifierConfig, "ngen": NgenConfig, "ocsvm": OcsvmConfig, "eval": EvalConfig,
}


def _nested_type(cls, name):
    return _NESTED.get(name) if cls is RunConfig else None


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env(data: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    data = json.loads(json.dumps(data))
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        parts = key[len(ENV_PREFIX):].lower().split("__")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"{key}: {part} is not a section")
        node[parts[-1]] = _parse_env_value(raw)
    return data


def load_config(path=None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Read the JSON config (if any), apply ``overrides`` then environment variables."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    for k, v in (overrides or {}).items():
        data[k] = v
    return _build(RunConfig, apply_env(data, environ))
