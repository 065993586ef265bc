import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occflow.errors import ConfigurationError, NumericError, StateError
from occflow.ndcompute import (
    Adam,
    LayerSpec,
    ModelBundle,
    Network,
    OptimizerState,
    Tensor,
    activation,
    adam_step,
    avgpool1d,
    conv1d,
    conv2d,
    dense,
    flatten,
    grad_check,
    maxpool2d,
    reshape,
    upsample2d,
)


def test_identity_kernel_conv_returns_input():
    net = Network([conv2d(1, kernel_size=1, bias=False)], (5, 7, 1))
    net.layers[0].params["W"].data[...] = 1.0
    x = np.random.default_rng(0).normal(size=(3, 5, 7, 1))
    np.testing.assert_array_equal(net.forward(x), x)


def test_three_pools_reach_2048_bottleneck():
    specs = []
    for f in (4, 4, 4):
        specs += [conv2d(f), activation("relu"), maxpool2d()]
    specs += [conv2d(32), flatten()]
    net = Network(specs, (64, 64, 4))
    assert net.layers[2].out_shape == (32, 32, 4)
    assert net.layers[8].out_shape == (8, 8, 4)
    assert net.output_shape == (2048,)


def test_zero_dense_sigmoid_is_half():
    net = Network([dense(3), activation("sigmoid")], (4,))
    out = net.forward(np.random.default_rng(1).normal(size=(6, 4)))
    np.testing.assert_array_equal(out, 0.5)


def test_same_padding_keeps_spatial_dims():
    net = Network([conv2d(5, kernel_size=3)], (6, 10, 2))
    assert net.output_shape == (6, 10, 5)
    net1 = Network([conv1d(3, kernel_size=5)], (12, 2))
    assert net1.output_shape == (12, 3)


def test_odd_pool_input_is_configuration_error():
    with pytest.raises(ConfigurationError, match="layer 0"):
        Network([maxpool2d()], (5, 4, 1))


def test_input_shape_mismatch_names_input_layer():
    net = Network([dense(2)], (3,))
    with pytest.raises(ConfigurationError, match="input layer"):
        net.forward(np.zeros((1, 4)))


def test_bad_specs_rejected():
    with pytest.raises(ConfigurationError):
        LayerSpec("conv3d", {})
    with pytest.raises(ConfigurationError):
        activation("gelu")
    with pytest.raises(ConfigurationError):
        conv2d(0)


def test_nonfinite_forward_is_numeric_error():
    net = Network([dense(1)], (2,))
    net.layers[0].params["W"].data[...] = np.inf
    with pytest.raises(NumericError):
        net.forward(np.ones((1, 2)))


def test_dense_linear_gradient_is_outer_product():
    net = Network([dense(3, bias=False)], (4,))
    net.init(np.random.default_rng(2))
    x = np.array([[1.0, -2.0, 0.5, 3.0]])
    net.forward(x)
    net.backward(np.ones((1, 3)))
    np.testing.assert_allclose(net.layers[0].params["W"].grad, np.outer(x[0], np.ones(3)))


def test_backward_before_forward_is_state_error():
    net = Network([dense(2)], (2,))
    with pytest.raises(StateError):
        net.backward(np.ones((1, 2)))


def test_frozen_network_passes_input_grads_only():
    rng = np.random.default_rng(3)
    net = Network([dense(4), activation("tanh"), dense(2)], (3,)).init(rng)
    x = rng.normal(size=(5, 3))
    with net.frozen():
        net.forward(x)
        dx = net.backward(np.ones((5, 2)))
    assert all(p.grad is None for p in net.parameters())
    assert dx.shape == x.shape and np.any(dx != 0)
    assert net.trainable


def _small_nets():
    """One small network per layer kind, with an input shape for each."""
    return [
        ([conv2d(3), activation("tanh"), maxpool2d(), conv2d(2, bias=False), flatten(), dense(2)], (4, 4, 2)),
        ([conv2d(2), activation("leaky_relu", 0.3), upsample2d(), conv2d(1), activation("sigmoid")], (2, 2, 1)),
        ([reshape((8, 1)), conv1d(3), activation("leaky_relu", 0.3), avgpool1d(), conv1d(2),
          flatten(), dense(1), activation("sigmoid")], (8,)),
        ([dense(5), activation("relu"), dense(3), activation("tanh")], (4,)),
    ]


@pytest.mark.parametrize("case", range(4))
def test_every_layer_kind_passes_grad_check(case):
    specs, shape = _small_nets()[case]
    rng = np.random.default_rng(10 + case)
    net = Network(specs, shape).init(rng)
    for layer in net.layers:
        if "b" in layer.params:
            layer.params["b"].data = rng.normal(size=layer.params["b"].shape) * 0.1
    x = rng.normal(size=(2,) + shape)
    report = grad_check(net, x, tolerance=1e-4, rng=rng)
    assert report.passed, str(report)


def test_linear_network_grad_check_near_machine_precision():
    rng = np.random.default_rng(4)
    net = Network([dense(4), dense(3), dense(2)], (5,)).init(rng)
    report = grad_check(net, rng.normal(size=(3, 5)), tolerance=1e-7, rng=rng)
    assert report.passed, str(report)
    assert report.worst < 1e-7


def test_relu_network_away_from_kinks_passes():
    rng = np.random.default_rng(5)
    net = Network([dense(6), activation("relu"), dense(4), activation("relu"), dense(2)], (3,)).init(rng)
    x = rng.normal(size=(4, 3))
    # resample until every pre-activation is at least 1e-3 away from the kink
    for _ in range(100):
        h1 = x @ net.layers[0].params["W"].data + net.layers[0].params["b"].data
        h2 = np.maximum(h1, 0) @ net.layers[2].params["W"].data
        if np.abs(h1).min() > 1e-3 and np.abs(h2).min() > 1e-3:
            break
        x = rng.normal(size=(4, 3))
    assert grad_check(net, x, tolerance=1e-4, rng=rng).passed


def test_corrupted_gradient_fails_exactly_that_layer(monkeypatch):
    rng = np.random.default_rng(6)
    net = Network([dense(4), activation("tanh"), dense(3), activation("tanh"), dense(2)], (3,)).init(rng)
    target = net.layers[2]
    original = target.backward

    def doubled(dy, param_grads=True, input_grad=True):
        dx = original(dy, param_grads, input_grad)
        for p in target.params.values():
            p.grad = p.grad * 2
        return dx

    monkeypatch.setattr(target, "backward", doubled)
    report = grad_check(net, rng.normal(size=(2, 3)), rng=rng)
    assert report.failed == ["layer 2 (dense)"]


def test_adam_zero_gradient_leaves_parameters():
    p = Tensor(np.array([1.0, -2.0, 3.0]))
    p.grad = np.zeros(3)
    state = OptimizerState(learning_rate=0.1)
    for _ in range(5):
        adam_step([p], state)
    np.testing.assert_array_equal(p.data, [1.0, -2.0, 3.0])
    assert state.step == 5


def test_adam_constant_gradient_moves_monotonically():
    p = Tensor(np.array([0.0, 0.0]))
    state = OptimizerState(learning_rate=0.01)
    history = []
    for _ in range(50):
        p.grad = np.array([0.7, -0.2])
        adam_step([p], state)
        history.append(p.data.copy())
    h = np.array(history)
    assert np.all(np.diff(h[:, 0]) < 0) and np.all(np.diff(h[:, 1]) > 0)


def test_adam_scalar_quadratic_matches_recurrence():
    # independent scalar recurrence in plain floats
    w, m, v = 1.0, 0.0, 0.0
    for t in range(1, 201):
        g = 2 * w
        m = 0.5 * m + 0.5 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.1 * (m / (1 - 0.5**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)

    p = Tensor(np.array([1.0]))
    opt = Adam([p], learning_rate=0.1, beta1=0.5, beta2=0.999)
    for _ in range(200):
        p.grad = 2 * p.data
        opt.step()
    assert abs(p.data[0]) < 0.05
    assert p.data[0] == pytest.approx(w, abs=1e-12)


def test_adam_missing_grad_is_state_error():
    with pytest.raises(StateError):
        adam_step([Tensor(np.zeros(2), name="w")], OptimizerState())


def test_optimizer_state_validation():
    with pytest.raises(ConfigurationError):
        OptimizerState(learning_rate=0)
    with pytest.raises(ConfigurationError):
        OptimizerState(beta1=1.0)


def _train_steps(seed, steps=5):
    rng = np.random.default_rng(seed)
    net = Network([conv2d(3), activation("relu"), maxpool2d(), flatten(), dense(1)], (4, 4, 2)).init(rng)
    opt = Adam(net.parameters(), learning_rate=1e-2)
    x = rng.normal(size=(4, 4, 4, 2))
    for _ in range(steps):
        y = net.forward(x)
        net.backward(2 * y / y.size)
        opt.step()
    return net


def test_training_is_bit_deterministic():
    a, b = _train_steps(7), _train_steps(7)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert pa.data.tobytes() == pb.data.tobytes()


def test_bundle_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(8)
    enc = Network([conv2d(2, bias=False), activation("relu"), maxpool2d(), flatten()], (4, 4, 1), "encoder").init(rng)
    head = Network([dense(1), activation("sigmoid")], (8,), "head").init(rng)
    head.trainable = False
    bundle = ModelBundle("demo", {"encoder": enc, "head": head},
                         {"center": rng.normal(size=8)}, {"lambda": 0.5})
    digest = bundle.save(tmp_path / "m.occf")
    raw = (tmp_path / "m.occf").read_bytes()
    assert raw[:4] == b"OCCF"
    again = ModelBundle.load(tmp_path / "m.occf")
    assert again.to_bytes() == raw
    assert again.save(tmp_path / "n.occf") == digest
    assert again.attrs == {"lambda": 0.5}
    assert not again.networks["head"].trainable
    for pa, pb in zip(enc.parameters(), again.networks["encoder"].parameters()):
        assert pa.data.tobytes() == pb.data.tobytes()


def test_bundle_rejects_bad_magic():
    with pytest.raises(ConfigurationError):
        ModelBundle.from_bytes(b"XXXX" + b"\0" * 8)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_pool_upsample_shape_algebra(n, half, seed):
    x = np.random.default_rng(seed).normal(size=(n, 2 * half, 2 * half, 2))
    pool = Network([maxpool2d()], x.shape[1:])
    up = Network([upsample2d()], (half, half, 2))
    pooled = pool.forward(x)
    assert pooled.shape == (n, half, half, 2)
    assert up.forward(pooled).shape == x.shape
    # max of each 2x2 block dominates all four of its entries
    assert np.all(up.forward(pooled) >= x)
