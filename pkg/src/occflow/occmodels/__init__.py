"""DCAE pretraining, DSVDD, IO-GEN and the label-switch classifier."""

from .architectures import FEATURE_DIM, NOISE_DIM, PAPER_WIDTHS, build_classifier, build_decoder, build_discriminator, build_encoder, build_generator
from .classifier import ClassifierModel, init_classifier, predict, synthetic_features, train_classifier, train_label_switch
from .dcae import DcaeModel, init_dcae, train_dcae
from .dsvdd import HypersphereDescription, init_center, svdd_score, train_dsvdd, weight_norm
from .gan import GeneratorModel, init_generator, train_generator, train_iogen

__all__ = [
    "ClassifierModel", "DcaeModel", "FEATURE_DIM", "GeneratorModel", "HypersphereDescription", "NOISE_DIM",
    "PAPER_WIDTHS", "build_classifier", "build_decoder", "build_discriminator", "build_encoder",
    "build_generator", "init_center", "init_classifier", "init_dcae", "init_generator", "predict",
    "svdd_score", "synthetic_features", "train_classifier", "train_dcae", "train_dsvdd", "train_generator",
    "train_iogen", "train_label_switch", "weight_norm",
]
