"""Layer stacks for the DCAE, generator, discriminator and classifier."""

from __future__ import annotations

from ..ndcompute import Network, activation, avgpool1d, conv1d, conv2d, dense, flatten, maxpool2d, reshape, upsample2d

GRID = 64
BOTTLENECK_FILTERS = 32
FEATURE_DIM = 8 * 8 * BOTTLENECK_FILTERS  # 2048
NOISE_DIM = 100
PAPER_WIDTHS = (32, 64, 128)
CLASSIFIER_FILTERS = (8, 16, 24, 48, 48)


def encoder_specs(widths=PAPER_WIDTHS, bias=False, bottleneck="relu"):
    """Three conv+ReLU+maxpool blocks, then a 32-kernel bottleneck, flattened.

    The bottleneck is rectified by default so that encodings live in the
    same non-negative range the generator's ReLU dense layer can produce.
    """
    specs = []
    for w in widths:
        specs += [conv2d(w, bias=bias), activation("relu"), maxpool2d()]
    specs.append(conv2d(BOTTLENECK_FILTERS, bias=bias))
    if bottleneck != "linear":
        specs.append(activation(bottleneck))
    specs.append(flatten())
    return specs


def decoder_specs(channels, widths=PAPER_WIDTHS):
    specs = [reshape((8, 8, BOTTLENECK_FILTERS))]
    for w in reversed(widths):
        specs += [conv2d(w), activation("relu"), upsample2d()]
    specs += [conv2d(channels), activation("tanh")]
    return specs


def build_encoder(channels, widths=PAPER_WIDTHS, bias=False, name="encoder") -> Network:
    return Network(encoder_specs(widths, bias), (GRID, GRID, channels), name)


def build_decoder(channels, widths=PAPER_WIDTHS, name="decoder") -> Network:
    return Network(decoder_specs(channels, widths), (FEATURE_DIM,), name)


def build_generator(channels, widths=PAPER_WIDTHS, noise_dim=NOISE_DIM, name="generator") -> Network:
    specs = [dense(FEATURE_DIM), activation("relu")] + decoder_specs(channels, widths)
    return Network(specs, (noise_dim,), name)


GENERATOR_DECODER_OFFSET = 2  # generator layers before the decoder replica


def build_discriminator(channels, widths=PAPER_WIDTHS):
    """Discriminator as (body, head): the encoder architecture, then dense + sigmoid.

    The body's flattened output is the final hidden layer that GEN's
    feature matching targets.
    """
    body = Network(encoder_specs(widths, bias=True), (GRID, GRID, channels), "disc_body")
    head = Network([dense(1), activation("sigmoid")], (FEATURE_DIM,), "disc_head")
    return body, head


def build_classifier(filters=CLASSIFIER_FILTERS, kernel_size=3, alpha=0.3, name="classifier") -> Network:
    """Five conv1d + LeakyReLU + avgpool blocks over the 2048-long feature, then dense + sigmoid."""
    specs = [reshape((FEATURE_DIM, 1))]
    for f in filters:
        specs += [conv1d(f, kernel_size=kernel_size), activation("leaky_relu", alpha), avgpool1d(2)]
    specs += [flatten(), dense(1), activation("sigmoid")]
    return Network(specs, (FEATURE_DIM,), name)
