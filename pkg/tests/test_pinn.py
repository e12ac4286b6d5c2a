import os

import numpy as np
import pytest

from network import init_random
from policy_iteration import AdamState, TrainConfig, adam_step, initial_policy, run_pinn_pi, target_gain
from systems import linearize, make_bilinear, make_pendulum, make_synthetic


def _reference(benchmark):
    def value(x):
        return benchmark.reference_value(x, np)

    return value


# region Optimizer -----------------------------------------------------------------------------------------------------

def test_adam_first_step():
    state = AdamState({'p': np.array([1.0, -2.0])}, TrainConfig(learning_rate=0.1))
    params = adam_step(state, {'p': np.array([1.0, 1.0])})
    np.testing.assert_allclose(params['p'], [0.9, -2.1], atol=1e-7)
    assert state.step == 1


def test_adam_zero_gradient():
    state = AdamState({'p': np.array([0.3, 0.7])}, TrainConfig(learning_rate=0.1))
    for _ in range(3):
        params = adam_step(state, {'p': np.zeros(2)})
    np.testing.assert_array_equal(params['p'], [0.3, 0.7])


def test_adam_deterministic():
    cfg = TrainConfig(learning_rate=0.05)
    gradients = [np.array([0.5, -1.0]), np.array([0.2, 0.1]), np.array([-0.3, 0.4])]
    trajectories = []
    for _ in range(2):
        state = AdamState({'p': np.array([1.0, 1.0])}, cfg)
        trajectories.append([adam_step(state, {'p': g})['p'] for g in gradients])
    np.testing.assert_array_equal(np.array(trajectories[0]), np.array(trajectories[1]))


def test_adam_state_for_net():
    net = init_random(4, 2, seed=0)
    state = AdamState.for_net(net, TrainConfig())
    np.testing.assert_array_equal(state.net().W, net.W)
    np.testing.assert_array_equal(state.net().beta, net.beta)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(steps_per_iter=0)
    with pytest.raises(ValueError):
        TrainConfig(batch=0)


# endregion

# region Gain target ---------------------------------------------------------------------------------------------------

def test_target_gain_fixed_point():
    A, B, Qhat, R = np.zeros((1, 1)), np.eye(1), 2 * np.eye(1), np.eye(1)
    np.testing.assert_allclose(target_gain(A, B, Qhat, R, [[-1.0]]), [[-1.0]])
    assert target_gain(A, B, Qhat, R, [[1.0]]) is None


@pytest.mark.parametrize('c', [0.1, 10.0])
def test_target_gain_scaling_invariance(c):
    system = make_pendulum().system
    A, B, Qhat = linearize(system)
    K = np.array([[-1.0, -0.3]])
    np.testing.assert_allclose(target_gain(A, B, c * Qhat, c * system.R, K), target_gain(A, B, Qhat, system.R, K),
                               rtol=1e-10)


# endregion

# region Policy iteration ----------------------------------------------------------------------------------------------

def test_short_run(tmp_path):
    benchmark = make_synthetic(1)
    cfg = TrainConfig(width=10, seed=0, steps_per_iter=200, log_every=50, max_iters=2)
    run = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg, _reference(benchmark), benchmark.name,
                      checkpoint_dir=str(tmp_path))
    assert run.status == 'max_iters'
    assert run.iterations == 2
    assert run.records[0].final_loss < run.records[0].initial_loss
    assert len(run.steps) == 8
    assert list(run.steps_frame().columns) == ['iter', 'step', 'residual_mse', 'origin_penalty', 'gain_penalty',
                                               'test_error']
    assert sorted(os.listdir(tmp_path)) == ['net_iter01.json', 'net_iter02.json']
    assert run.net.value(np.zeros(1)) == pytest.approx(0.0, abs=1e-14)


def test_deterministic_with_minibatches():
    benchmark = make_synthetic(2)
    cfg = TrainConfig(width=8, seed=4, steps_per_iter=30, log_every=10, max_iters=2, batch=5)
    first = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg)
    second = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg)
    for a, b in zip(first.nets, second.nets):
        np.testing.assert_array_equal(a.W, b.W)
        np.testing.assert_array_equal(a.beta, b.beta)


def test_bilinear_disables_gain_matching():
    benchmark = make_bilinear()
    cfg = TrainConfig(width=6, seed=0, steps_per_iter=20, log_every=10, max_iters=1, lambda_gain=1.0)
    run = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg)
    assert run.records[0].gain_penalty == 0


@pytest.mark.slow
def test_synthetic_accuracy_2d():
    benchmark = make_synthetic(2)
    cfg = TrainConfig(width=200, seed=0, steps_per_iter=2000, log_every=500, max_iters=10)
    run = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg, _reference(benchmark))
    assert sum(r.final_loss <= r.initial_loss for r in run.records) >= 9
    assert run.final_test_error <= 5e-2


@pytest.mark.slow
def test_synthetic_accuracy_5d():
    benchmark = make_synthetic(5)
    cfg = TrainConfig(width=800, seed=0, steps_per_iter=2000, log_every=500, max_iters=10)
    run = run_pinn_pi(benchmark.system, initial_policy(benchmark), cfg, _reference(benchmark))
    assert run.final_test_error <= 1e-1

# endregion
