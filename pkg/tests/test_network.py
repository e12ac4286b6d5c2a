import numpy as np
import pytest

from network import (Activation, AnalyticNet, FeedbackPolicy, LinearPolicy, ValueNet, from_record, init_random,
                     load_net, policy, policy_jacobian_origin, save_net, to_record)
from systems import make_bilinear, make_synthetic


def _net(W, b, beta, activation=Activation.TANH, bias_shift=0.0):
    return ValueNet(W=np.atleast_2d(W), b=b, beta=beta, activation=activation, bias_shift=bias_shift)


# region Initialization ------------------------------------------------------------------------------------------------

def test_init_random_deterministic():
    a = init_random(3, 2, seed=7)
    b = init_random(3, 2, seed=7)
    np.testing.assert_array_equal(a.W, b.W)
    np.testing.assert_array_equal(a.b, b.b)
    assert a.W.shape == (3, 2) and a.b.shape == (3,)
    assert np.all(np.abs(a.W) <= 1) and np.all(np.abs(a.b) <= 1)
    assert not np.array_equal(a.W, init_random(3, 2, seed=8).W)


def test_init_random_zero_output():
    net = init_random(5, 2, seed=0)
    np.testing.assert_array_equal(net.value(np.random.default_rng(0).uniform(-1, 1, (10, 2))), np.zeros(10))
    assert net.bias_shift == 0


def test_init_random_zero_bias():
    net = init_random(4, 1, seed=0, activation='relu', zero_bias=True)
    np.testing.assert_array_equal(net.b, np.zeros(4))
    assert net.activation is Activation.RELU


# endregion

# region Evaluation ----------------------------------------------------------------------------------------------------

def test_value_examples():
    assert _net([1.0], [0.0], [1.0]).value(np.array([0.0])) == 0
    shifted = _net([1.0], [1.0], [2.0], bias_shift=2 * np.tanh(1.0))
    assert shifted.value(np.array([0.0])) == pytest.approx(0.0, abs=1e-15)
    assert _net([1.0], [0.0], [1.0], Activation.RELU).value(np.array([0.7])) == pytest.approx(0.7)


def test_gradient_examples():
    np.testing.assert_allclose(_net([1.0], [0.0], [1.0]).gradient(np.array([0.0])), [1.0])
    np.testing.assert_allclose(_net([2.0], [0.0], [1.0]).gradient(np.array([0.0])), [2.0])
    relu = _net([[1.0, -2.0], [0.5, 1.0]], [0.1, -0.3], [0.0, 0.0], Activation.RELU)
    np.testing.assert_array_equal(relu.gradient(np.array([0.3, 0.4])), [0.0, 0.0])


def test_hessian_origin_examples():
    W = np.array([[1.0, 2.0], [-0.5, 0.3]])
    np.testing.assert_array_equal(_net(W, [0.0, 0.0], [1.0, -2.0]).hessian_origin(), np.zeros((2, 2)))
    np.testing.assert_array_equal(_net(W, [0.4, -0.1], [0.0, 0.0]).hessian_origin(), np.zeros((2, 2)))
    expected = -2 * np.tanh(1.0) * (1 - np.tanh(1.0) ** 2)
    assert _net([1.0], [1.0], [1.0]).hessian_origin()[0, 0] == pytest.approx(expected)
    assert expected == pytest.approx(-0.6397, abs=1e-4)
    with pytest.raises(ValueError):
        _net([1.0], [0.0], [1.0], Activation.RELU).hessian_origin()


def test_gradient_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(100):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 8))
        net = _net(rng.uniform(-1, 1, (m, n)), rng.uniform(-1, 1, m), rng.uniform(-1, 1, m))
        x = rng.uniform(-1, 1, n)
        steps = np.eye(n) * h
        estimate = (net.value(x + steps) - net.value(x - steps)) / (2 * h)
        np.testing.assert_allclose(net.gradient(x), estimate, rtol=1e-5, atol=1e-8)

        hessian = (net.gradient(steps) - net.gradient(-steps)) / (2 * h)
        np.testing.assert_allclose(net.hessian_origin(), hessian, rtol=1e-5, atol=1e-8)


def test_normalized_value_vanishes_at_origin(rng):
    net = _net(rng.uniform(-1, 1, (6, 2)), rng.uniform(-1, 1, 6), rng.uniform(-1, 1, 6)).normalized()
    assert net.value(np.zeros(2)) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_array_equal(net.gradient(np.array([0.2, 0.1])),
                                  net.with_beta(net.beta).gradient(np.array([0.2, 0.1])))


# endregion

# region Policy --------------------------------------------------------------------------------------------------------

def test_policy_of_reference_value():
    benchmark = make_synthetic(1)
    oracle = AnalyticNet.from_benchmark(benchmark)
    np.testing.assert_allclose(policy(oracle, benchmark.system, np.array([1.0])), [-3.0])
    np.testing.assert_array_equal(policy(oracle, benchmark.system, np.array([0.0])), [0.0])


def test_policy_bilinear():
    benchmark = make_bilinear()
    oracle = AnalyticNet.from_benchmark(benchmark)
    np.testing.assert_allclose(policy(oracle, benchmark.system, np.array([0.5])), [-0.5])


def test_policy_is_zero_at_origin(rng):
    system = make_synthetic(2).system
    net = _net(rng.uniform(-1, 1, (5, 2)), rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5))
    np.testing.assert_array_equal(FeedbackPolicy(net, system)(np.zeros(2)), np.zeros(2))


def test_policy_linear_in_beta(rng):
    system = make_synthetic(2).system
    net = _net(rng.uniform(-1, 1, (5, 2)), rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5))
    x = np.array([0.3, -0.6])
    scaled = net.with_beta(3 * net.beta)
    np.testing.assert_allclose(scaled.gradient(x), 3 * net.gradient(x), rtol=1e-14)
    np.testing.assert_allclose(policy(scaled, system, x), 3 * policy(net, system, x), rtol=1e-14)


def test_policy_jacobian_origin():
    system = make_synthetic(1).system
    quadratic = AnalyticNet(lambda x, xp: xp.sum(x ** 2, axis=-1), lambda x, xp: 2 * x, 1, hessian=[[2.0]])
    np.testing.assert_allclose(policy_jacobian_origin(quadratic, system), [[-1.0]])

    silent = _net([[1.0, 0.5]], [0.3], [0.0])
    np.testing.assert_array_equal(policy_jacobian_origin(silent, make_synthetic(2).system), np.zeros((2, 2)))
    centered = _net([[1.0, 0.5], [-0.2, 0.7]], [0.0, 0.0], [1.0, 2.0])
    np.testing.assert_allclose(policy_jacobian_origin(centered, make_synthetic(2).system), np.zeros((2, 2)))

    with pytest.raises(ValueError):
        policy_jacobian_origin(_net([1.0], [0.0], [1.0], Activation.RELU), system)


def test_policy_jacobian_matches_finite_differences(rng):
    system = make_bilinear().system
    net = _net(rng.uniform(-1, 1, (4, 1)), rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
    estimate = FeedbackPolicy(net, system).jacobian_origin()
    h = 1e-5
    numeric = (policy(net, system, np.array([h])) - policy(net, system, np.array([-h]))) / (2 * h)
    np.testing.assert_allclose(estimate, numeric[:, None], rtol=1e-5, atol=1e-8)


def test_linear_policy():
    K = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(LinearPolicy(K)(np.array([0.5, 0.25])), [0.0])
    np.testing.assert_array_equal(LinearPolicy(K).jacobian_origin(), K)


# endregion

def test_record_round_trip(tmp_path):
    net = _net([[1.0, 0.5], [-0.25, 2.0]], [0.1, -0.2], [1.5, -0.5], bias_shift=0.3)
    path = str(tmp_path / 'nets' / 'net.json')
    save_net(net, path)
    loaded = load_net(path)
    for key in ('W', 'b', 'beta'):
        np.testing.assert_array_equal(getattr(loaded, key), getattr(net, key))
    assert loaded.bias_shift == net.bias_shift
    assert loaded.activation is Activation.TANH


def test_malformed_records(tmp_path):
    record = to_record(_net([1.0], [0.0], [1.0]))
    record['m'] = 3
    with pytest.raises(ValueError):
        from_record(record)
    path = tmp_path / 'broken.json'
    path.write_text('{"W": [1.0')
    with pytest.raises(ValueError):
        load_net(str(path))
