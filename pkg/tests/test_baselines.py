import numpy as np
import pytest
from scipy.optimize import minimize
from sklearn.svm import OneClassSVM

from occflow import baselines
from occflow.config import ClassifierConfig, GanConfig, NgenConfig, OcsvmConfig
from occflow.errors import ConfigurationError, NumericError
from occflow.flowdata import flow_weight
from occflow.ndcompute import ModelBundle
from occflow.occmodels import init_center, init_dcae, train_dsvdd
from occflow.config import DsvddConfig

TINY = (2, 2, 2)


@pytest.mark.parametrize("nu", [0.05, 0.2, 0.5])
def test_ocsvm_matches_sklearn_decision(nu):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(80, 6))
    q = rng.normal(size=(30, 6)) * 1.5
    ours = baselines.fit_ocsvm(x, nu, tol=1e-10)
    ref = OneClassSVM(kernel="rbf", gamma="scale", nu=nu, tol=1e-10).fit(x)
    # libsvm scales the dual by nu*n; decision values differ by exactly that factor
    np.testing.assert_allclose(ours.decision_function(q) * nu * len(x), ref.decision_function(q), atol=1e-5)


def test_ocsvm_dual_against_generic_qp():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(7, 3))
    nu = 0.4
    K = baselines.kernel_matrix(x, x, "rbf", baselines.rbf_gamma(x))
    alpha, _ = baselines.solve_ocsvm_dual(K, nu, tol=1e-12)
    C = 1 / (nu * len(x))
    res = minimize(lambda a: 0.5 * a @ K @ a, np.full(len(x), 1 / len(x)), jac=lambda a: K @ a,
                   bounds=[(0, C)] * len(x), constraints=[{"type": "eq", "fun": lambda a: a.sum() - 1}],
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    assert 0.5 * alpha @ K @ alpha <= res.fun + 1e-9
    assert abs(alpha.sum() - 1) < 1e-12 and alpha.min() >= 0 and alpha.max() <= C + 1e-12


def test_ocsvm_linear_kernel_runs():
    rng = np.random.default_rng(1)
    x = rng.normal(loc=3.0, size=(40, 4))
    mdl = baselines.fit_ocsvm(x, 0.1, kernel="linear")
    assert mdl.score(x).shape == (40,)


def test_ocsvm_identical_points_share_decision():
    x = np.array([[0.0, 1.0], [0.0, 1.0], [2.0, -1.0], [1.0, 1.0]])
    for nu in (0.1, 0.5, 1.0):
        mdl = baselines.fit_ocsvm(x, nu)
        d = mdl.decision_function(x)
        assert d[0] == pytest.approx(d[1], abs=1e-12)


def test_ocsvm_degenerate_inputs():
    with pytest.raises(NumericError):
        baselines.fit_ocsvm(np.ones((5, 3)), 0.1)
    with pytest.raises(ConfigurationError):
        baselines.OcSvmModel(1.5, "rbf", 1.0, np.zeros((1, 2)), np.ones(1), 0.0)


def test_ocsvm_bundle_round_trip():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 3))
    mdl = baselines.fit_ocsvm(x, 0.2)
    back = baselines.OcSvmModel.from_bundle(ModelBundle.from_bytes(mdl.to_bundle().to_bytes()))
    np.testing.assert_array_equal(back.decision_function(x), mdl.decision_function(x))


def test_ngen_sampler_std_close_to_alpha():
    noise = baselines.NGenNoise(0.37, dim=32)
    v = noise.sample(np.random.default_rng(0), 10_000)
    assert np.all(np.abs(v.std(axis=0) / 0.37 - 1) < 0.05)


def test_ngen_alpha_must_be_positive():
    with pytest.raises(ConfigurationError):
        baselines.NGenNoise(0.0)
    with pytest.raises(ConfigurationError):
        baselines.NGenNoise(-1.0)


def test_ngen_alpha_statistics():
    f = np.array([[0.0, 0.0], [2.0, 4.0]])  # per-feature variances 1 and 4
    assert baselines.ngen_alpha(f, "variance") == pytest.approx(2.5)
    assert baselines.ngen_alpha(f, "std") == pytest.approx(np.sqrt(2.5))


def test_ofw_score_is_mean_frame_weight():
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(3, 64, 64, 4))
    want = [(flow_weight((s[..., 0], s[..., 1])) + flow_weight((s[..., 2], s[..., 3]))) / 2 for s in raw]
    np.testing.assert_allclose(baselines.ofw_score(raw), want)


@pytest.fixture(scope="module")
def tiny_models():
    rng = np.random.default_rng(0)
    x = np.tanh(rng.normal(size=(8, 64, 64, 2)))
    dcae = init_dcae(2, rng, TINY)
    c, enc = init_center(dcae.encoder, x, return_encodings=True)
    dsvdd = train_dsvdd(dcae.encoder, c, x, DsvddConfig(epochs=1, batch_size=4), rng, enc)
    return x, dcae, dsvdd


def test_dcae_error_score_matches_manual_mse(tiny_models):
    x, dcae, _ = tiny_models
    want = ((dcae.reconstruct(x) - x) ** 2).mean(axis=(1, 2, 3))
    np.testing.assert_allclose(baselines.dcae_error_score(dcae, x), want)


def test_train_gen_and_ngen_smoke(tiny_models):
    x, dcae, dsvdd = tiny_models
    rng = np.random.default_rng(1)
    gan = GanConfig(epochs=1, steps_per_epoch=1, batch_size=4, eval_samples=4)
    clf_cfg = ClassifierConfig(epochs=1, batch_size=8, synthetic_pool=8)
    gen, clf = baselines.train_gen(dcae, dsvdd, x, gan, clf_cfg, rng, TINY)
    assert gen.kind == "gen" and clf.source == "gen"
    lik = clf.likelihood(dsvdd.encode(x))
    assert lik.shape == (8,) and np.all((lik > 0) & (lik < 1))

    noise, nclf = baselines.train_ngen(dsvdd, x, NgenConfig(), clf_cfg, rng)
    assert noise.alpha == pytest.approx(baselines.ngen_alpha(dsvdd.encode(x)))
    assert nclf.source == "ngen"
    with pytest.raises(ConfigurationError):
        baselines.train_ngen(dsvdd, x, NgenConfig(alpha_source="generator"), clf_cfg, rng)


def test_train_ocsvm_grid(tiny_models):
    x, dcae, _ = tiny_models
    models = baselines.train_ocsvm(dcae.encoder, x, OcsvmConfig(nu_grid=[0.1, 0.5]))
    assert [m.nu for m in models] == [0.1, 0.5]
