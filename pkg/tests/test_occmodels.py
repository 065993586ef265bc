import numpy as np
import pytest

from occflow.config import ClassifierConfig, DcaeConfig, DsvddConfig, GanConfig
from occflow.errors import ConfigurationError, NumericError
from occflow.ndcompute import ModelBundle
from occflow.occmodels import (
    FEATURE_DIM,
    DcaeModel,
    GeneratorModel,
    HypersphereDescription,
    build_discriminator,
    build_encoder,
    init_center,
    init_dcae,
    init_generator,
    predict,
    train_dcae,
    train_dsvdd,
    train_generator,
    train_label_switch,
)
from occflow.occmodels.gan import _adversarial_grad

TINY = (2, 2, 2)


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    base = np.tanh(rng.normal(size=(1, 64, 64, 2)))
    return np.clip(base + 0.1 * rng.normal(size=(12, 64, 64, 2)), -1, 1)


@pytest.fixture(scope="module")
def trained(data):
    rng = np.random.default_rng(1)
    dcae = train_dcae(data, DcaeConfig(epochs=2, batch_size=4, learning_rate=1e-3), rng, TINY)
    c, enc = init_center(dcae.encoder, data, return_encodings=True)
    dsvdd = train_dsvdd(dcae.encoder, c, data, DsvddConfig(epochs=4, batch_size=4, learning_rate=1e-3), rng, enc)
    return dcae, dsvdd


def test_encoder_shapes_and_biases():
    enc = build_encoder(4, TINY)
    assert enc.output_shape == (FEATURE_DIM,)
    assert not any("b" in layer.params for layer in enc.layers)
    body, head = build_discriminator(4, TINY)
    assert body.output_shape == (FEATURE_DIM,) and head.output_shape == (1,)
    assert any("b" in layer.params for layer in body.layers)


def test_dcae_history_and_round_trip(data, trained):
    dcae, _ = trained
    assert [r["epoch"] for r in dcae.history] == [0, 1, 2]
    assert dcae.history[-1]["val_mse"] < dcae.history[0]["val_mse"]
    back = DcaeModel.from_bundle(ModelBundle.from_bytes(dcae.to_bundle().to_bytes()))
    np.testing.assert_array_equal(back.reconstruct(data), dcae.reconstruct(data))
    assert np.abs(dcae.reconstruct(data)).max() <= 1.0


def test_dcae_training_is_deterministic(data):
    cfg = DcaeConfig(epochs=1, batch_size=4)
    a = train_dcae(data, cfg, np.random.default_rng(5), TINY).to_bundle().to_bytes()
    b = train_dcae(data, cfg, np.random.default_rng(5), TINY).to_bundle().to_bytes()
    assert a == b


def test_center_is_clamped_mean(data, trained):
    dcae, _ = trained
    enc = dcae.encoder.predict(data)
    c = init_center(dcae.encoder, data, eps=0.05)
    mean = enc.mean(axis=0)
    big = np.abs(mean) >= 0.05
    np.testing.assert_array_equal(c[big], mean[big])
    assert np.all(np.abs(c[~big]) == 0.05)
    assert np.all(np.sign(c[~big]) == np.where(mean[~big] < 0, -1, 1))
    with pytest.raises(ConfigurationError):
        init_center(dcae.encoder, data[:0])


def test_dsvdd_pulls_data_toward_fixed_center(data, trained):
    dcae, dsvdd = trained
    c0 = init_center(dcae.encoder, data)
    np.testing.assert_array_equal(dsvdd.center, c0)
    dists = [r["mean_dist"] for r in dsvdd.history]
    assert dists[-1] < dists[0]
    np.testing.assert_allclose(dsvdd.score(data), ((dsvdd.encode(data) - c0) ** 2).sum(axis=1))
    # the pretrained encoder is left alone
    assert not np.array_equal(dcae.encoder.predict(data[:2]), dsvdd.encode(data[:2]))
    back = HypersphereDescription.from_bundle(ModelBundle.from_bytes(dsvdd.to_bundle().to_bytes()))
    np.testing.assert_array_equal(back.score(data), dsvdd.score(data))


def test_dsvdd_collapse_is_detected(data, trained):
    dcae, _ = trained
    c = init_center(dcae.encoder, data)
    with pytest.raises(NumericError, match="collapse"):
        train_dsvdd(dcae.encoder, c, data, DsvddConfig(epochs=1, collapse_variance=1e12), np.random.default_rng(0))


def test_generator_starts_from_decoder(trained):
    dcae, _ = trained
    gen = init_generator(dcae, 100, np.random.default_rng(0), TINY)
    dec_params = [p.data for p in dcae.decoder.parameters()]
    gen_params = [p.data for p in gen.parameters()][2:]
    assert len(dec_params) == len(gen_params)
    for a, b in zip(dec_params, gen_params):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("mode", ["saturating", "non_saturating"])
def test_adversarial_grad_matches_finite_difference(mode):
    p = np.array([[0.2], [0.7], [0.95]])
    _, g = _adversarial_grad(p, mode)
    h = 1e-7
    for i in range(3):
        q = p.copy()
        q[i] += h
        num = (_adversarial_grad(q, mode)[0] - _adversarial_grad(p, mode)[0]) / h
        assert g[i, 0] == pytest.approx(num, rel=1e-4)


def test_iogen_moves_samples_toward_center(data, trained):
    dcae, dsvdd = trained
    enc_before = [p.data.copy() for p in dsvdd.encoder.parameters()]
    cfg = GanConfig(epochs=3, steps_per_epoch=4, batch_size=4, eval_samples=8,
                    learning_rate_g=1e-3, learning_rate_d=1e-3, feature_weight=10.0)
    gen = train_generator("iogen", dcae, dsvdd, data, cfg, np.random.default_rng(2), TINY)
    assert len(gen.history) == 3
    assert gen.history[-1]["g_fm"] < gen.history[0]["g_fm"]
    for a, p in zip(enc_before, dsvdd.encoder.parameters()):
        np.testing.assert_array_equal(a, p.data)
    x = gen.sample(np.random.default_rng(0), 5)
    assert x.shape == (5, 64, 64, 2) and np.abs(x).max() <= 1
    back = GeneratorModel.from_bundle(ModelBundle.from_bytes(gen.to_bundle().to_bytes()))
    z = gen.noise(np.random.default_rng(1), 3)
    np.testing.assert_array_equal(back.generate(z), gen.generate(z))
    assert back.kind == "iogen" and np.all((gen.discriminate(x) > 0) & (gen.discriminate(x) < 1))


def test_mode_collapse_guard(data, trained):
    dcae, dsvdd = trained
    cfg = GanConfig(epochs=3, steps_per_epoch=1, batch_size=2, eval_samples=4, collapse_threshold=1e9,
                    collapse_patience=2)
    with pytest.raises(NumericError, match="mode collapse"):
        train_generator("iogen", dcae, dsvdd, data, cfg, np.random.default_rng(0), TINY)


def test_label_switch_orders_likelihoods():
    rng = np.random.default_rng(0)
    c = rng.normal(size=FEATURE_DIM)
    real = c + rng.normal(scale=1.0, size=(64, FEATURE_DIM))
    synth = c + rng.normal(scale=0.1, size=(128, FEATURE_DIM))
    clf = train_label_switch(real, synth, ClassifierConfig(epochs=4, batch_size=16, learning_rate=1e-3), rng)
    far = c + rng.normal(scale=1.0, size=(32, FEATURE_DIM))
    near = c + rng.normal(scale=0.1, size=(32, FEATURE_DIM))
    assert np.median(clf.likelihood(far)) > np.median(clf.likelihood(near))
    assert [r["epoch"] for r in clf.history] == [1, 2, 3, 4]


def test_predict_requires_normalized_input(trained):
    from occflow.occmodels import ClassifierModel, init_classifier

    _, dsvdd = trained
    clf = ClassifierModel(init_classifier(np.random.default_rng(0)))
    with pytest.raises(ConfigurationError):
        predict(dsvdd, clf, np.full((1, 64, 64, 2), 3.0))
    assert predict(dsvdd, clf, np.zeros((2, 64, 64, 2))).shape == (2,)
