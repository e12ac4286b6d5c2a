import numpy as np
import pytest

from network import AnalyticNet, FunctionPolicy, LinearPolicy, ValueNet, ghjb_residual, hjb_residual, init_random
from systems import make_bilinear, make_pendulum, make_synthetic


def test_reference_value_evaluates_its_own_policy():
    benchmark = make_synthetic(1)
    sample = ghjb_residual(benchmark.system, FunctionPolicy(benchmark.reference_policy),
                           AnalyticNet.from_benchmark(benchmark), np.array([0.5]))
    assert abs(float(sample.residual)) <= 1e-12


def test_zero_net_and_policy_leave_cost():
    system = make_pendulum().system
    x = np.array([[0.3, -1.2], [1.0, 0.5]])
    sample = ghjb_residual(system, LinearPolicy(np.zeros((1, 2))), init_random(4, 2, seed=0), x)
    np.testing.assert_allclose(sample.residual, system.cost(x))
    np.testing.assert_allclose(sample.running_cost, system.cost(x))


def test_single_neuron_example():
    system = make_synthetic(1).system
    net = ValueNet(W=[[1.0]], b=[0.0], beta=[1.0])
    sample = ghjb_residual(system, LinearPolicy([[-2.0]]), net, np.array([0.5]))
    assert float(sample.drift_closed[0]) == pytest.approx(-0.875)
    assert float(sample.running_cost) == pytest.approx(1.375)
    assert float(sample.residual) == pytest.approx(1.375 - 0.875 / np.cosh(0.5) ** 2)
    assert float(sample.residual) == pytest.approx(0.6869, abs=1e-4)


def test_hjb_residual_examples():
    benchmark = make_synthetic(1)
    oracle = AnalyticNet.from_benchmark(benchmark)
    assert abs(float(hjb_residual(benchmark.system, oracle, np.array([0.7])))) <= 1e-12

    x = np.array([[0.2], [-0.9]])
    np.testing.assert_allclose(hjb_residual(benchmark.system, init_random(3, 1, seed=1), x),
                               -benchmark.system.cost(x))

    bilinear = make_bilinear()
    residual = hjb_residual(bilinear.system, AnalyticNet.from_benchmark(bilinear), np.array([0.3]))
    assert abs(float(residual)) <= 1e-12


def test_ghjb_residual_affine_in_beta(rng):
    system = make_synthetic(2).system
    base = init_random(6, 2, seed=3)
    policy = LinearPolicy([[-1.0, 0.2], [0.1, -1.5]])
    x = rng.uniform(-1, 1, (20, 2))
    beta1, beta2 = rng.normal(size=6), rng.normal(size=6)

    combined = ghjb_residual(system, policy, base.with_beta(beta1 + beta2), x)
    first = ghjb_residual(system, policy, base.with_beta(beta1), x)
    second = ghjb_residual(system, policy, base.with_beta(beta2), x)
    np.testing.assert_allclose(combined.residual, first.residual + second.residual - first.running_cost,
                               rtol=1e-12, atol=1e-12)
