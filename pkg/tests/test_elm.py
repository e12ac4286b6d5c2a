import numpy as np
import pytest
from scipy.linalg import solve_continuous_are

from dataset import sample_collocation
from network import FeedbackPolicy, LinearPolicy, ValueNet, ghjb_residual, init_random
from policy_iteration import (AdamState, ElmConfig, IterationRecord, LeastSquaresProblem, PiRun, TrainConfig, adam_step,
                              assemble, initial_policy, run_elm_pi, save_history, solve_ls)
from policy_iteration.elm import origin_rows
from simulation import converges, initial_states, simulate_batch
from systems import linearize, make_bilinear, make_lorenz, make_pendulum, make_synthetic


def _reference(benchmark):
    def value(x):
        return benchmark.reference_value(x, np)

    return value


# region Assembly ------------------------------------------------------------------------------------------------------

def test_assemble_single_point():
    system = make_synthetic(1).system
    net = ValueNet(W=[[1.0]], b=[0.0], beta=[0.0])
    problem = assemble(system, LinearPolicy([[-2.0]]), net, np.array([[0.5]]))
    np.testing.assert_allclose(problem.A, [[-0.875 / np.cosh(0.5) ** 2]])
    assert problem.A[0, 0] == pytest.approx(-0.68814, abs=1e-5)
    np.testing.assert_allclose(problem.t, [-1.375])

    beta, rank = solve_ls(problem)
    assert rank == 1
    sample = ghjb_residual(system, LinearPolicy([[-2.0]]), net.with_beta(beta), np.array([0.5]))
    assert abs(float(sample.residual)) <= 1e-12


def test_assemble_extra_rows():
    system = make_synthetic(2).system
    net = init_random(7, 2, seed=0)
    colloc = sample_collocation(system, 20, seed=0)
    policy = LinearPolicy(-np.eye(2))
    assert assemble(system, policy, net, colloc, lam=0.0).A.shape == (20, 7)
    assert assemble(system, policy, net, colloc, lam=1.0, bias_mode='subtract').A.shape == (20, 7)
    penalty = assemble(system, policy, net, colloc, lam=4.0, bias_mode='penalty')
    assert penalty.A.shape == (21, 7)
    np.testing.assert_allclose(penalty.A[20], 2.0 * np.tanh(net.b))
    ridge = assemble(system, policy, net, colloc, ridge=0.25)
    assert ridge.A.shape == (27, 7) and ridge.collocation_rows == 20
    np.testing.assert_allclose(ridge.A[20:], 0.5 * np.eye(7))


def test_origin_rows_match_network_derivatives():
    net = ValueNet(W=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, -2.0]], b=[0.5, -0.2, 0.1, 0.7],
                   beta=[0.3, -1.2, 2.0, 0.4])
    upper = np.triu_indices(2)
    rows, targets = origin_rows(net, np.array([[1.0, 2.0], [2.0, 3.0]]))
    assert rows.shape == (5, 4)
    np.testing.assert_allclose(rows[:2] @ net.beta, net.gradient(np.zeros(2)), atol=1e-14)
    np.testing.assert_allclose(rows[2:] @ net.beta, net.hessian_origin()[upper], atol=1e-14)
    np.testing.assert_array_equal(targets, [0.0, 0.0, 1.0, 2.0, 3.0])
    assert origin_rows(net)[0].shape == (2, 4)


def test_assemble_origin_rows():
    system = make_synthetic(2).system
    net = init_random(7, 2, seed=0)
    colloc = sample_collocation(system, 20, seed=0)
    policy = LinearPolicy(-np.eye(2))
    problem = assemble(system, policy, net, colloc, lambda_origin=0.5, hessian_target=2 * np.eye(2))
    assert problem.A.shape == (25, 7) and problem.collocation_rows == 20
    rows, targets = origin_rows(net, 2 * np.eye(2))
    np.testing.assert_allclose(problem.A[20:], np.sqrt(10.0) * rows)
    np.testing.assert_allclose(problem.t[20:], np.sqrt(10.0) * targets)

    relu = init_random(7, 2, seed=0, activation='relu')
    assert assemble(system, policy, relu, colloc, lambda_origin=0.5).A.shape == (20, 7)


def test_solve_ls_examples():
    beta, _ = solve_ls(LeastSquaresProblem(np.array([[1.0], [1.0]]), np.array([1.0, 1.0]), 2))
    np.testing.assert_allclose(beta, [1.0])
    beta, rank = solve_ls(LeastSquaresProblem(np.array([[1.0, 1.0]]), np.array([2.0]), 1))
    np.testing.assert_allclose(beta, [1.0, 1.0])
    assert rank == 1
    beta, _ = solve_ls(LeastSquaresProblem(np.eye(2), np.array([3.0, 4.0]), 2))
    np.testing.assert_allclose(beta, [3.0, 4.0])


def test_residual_rms_matches_ghjb_residual():
    system = make_synthetic(2).system
    net = init_random(12, 2, seed=5)
    colloc = sample_collocation(system, 30, seed=5)
    policy = LinearPolicy([[-1.0, 0.2], [0.0, -1.0]])
    problem = assemble(system, policy, net, colloc)
    beta, _ = solve_ls(problem)
    residual = ghjb_residual(system, policy, net.with_beta(beta).normalized(), colloc.points).residual
    assert problem.residual_rms(beta) == pytest.approx(np.sqrt(np.mean(residual ** 2)), rel=1e-10, abs=1e-14)


def test_exact_solve_beats_adam():
    system = make_synthetic(2).system
    net = init_random(20, 2, seed=1)
    colloc = sample_collocation(system, 60, seed=1)
    problem = assemble(system, LinearPolicy(-np.eye(2)), net, colloc)
    beta, _ = solve_ls(problem)

    state = AdamState({'beta': np.zeros(net.width)}, TrainConfig(learning_rate=1e-2))
    trained = state.arrays()['beta']
    for _ in range(2000):
        gradient = problem.A.T @ (problem.A @ trained - problem.t) / problem.collocation_rows
        trained = adam_step(state, {'beta': gradient})['beta']
    assert problem.residual_rms(trained) < problem.residual_rms(np.zeros(net.width))
    assert problem.residual_rms(beta) <= problem.residual_rms(trained) + 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        ElmConfig(width=0)
    with pytest.raises(ValueError):
        ElmConfig(bias_mode='shift')
    with pytest.raises(ValueError):
        ElmConfig(activation='sigmoid')
    with pytest.raises(ValueError):
        ElmConfig(lambda_origin=-1.0)
    assert ElmConfig(width=30).collocation_count(3) == 90
    assert ElmConfig(width=30, points=7).collocation_count(3) == 7


# endregion

# region Policy iteration ----------------------------------------------------------------------------------------------

def test_bilinear_exact():
    benchmark = make_bilinear()
    cfg = ElmConfig(width=10, seed=0, activation='relu', zero_bias=True)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), cfg, _reference(benchmark), benchmark.name)
    assert run.final_test_error <= 1e-12
    assert run.status == 'converged'
    increases = [r.max_increase for r in run.records[1:]]
    assert all(increase <= 10 * cfg.tol for increase in increases)
    assert np.isnan(run.records[0].sup_change)


def test_deterministic():
    benchmark = make_synthetic(2)
    cfg = ElmConfig(width=20, seed=3, max_iters=3)
    first = run_elm_pi(benchmark.system, initial_policy(benchmark), cfg)
    second = run_elm_pi(benchmark.system, initial_policy(benchmark), cfg)
    assert first.iterations == second.iterations == 3
    for a, b in zip(first.nets, second.nets):
        np.testing.assert_array_equal(a.beta, b.beta)
    assert first.final_test_error is None


def test_resample_redraws_hidden_layer():
    benchmark = make_synthetic(1)
    cfg = ElmConfig(width=15, seed=0, max_iters=3, resample=True)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), cfg, _reference(benchmark))
    assert run.iterations == 3
    assert not np.array_equal(run.nets[0].W, run.nets[1].W)
    assert all(np.isfinite(r.residual_rms) for r in run.records)


def test_penalty_mode():
    benchmark = make_synthetic(1)
    cfg = ElmConfig(width=15, seed=0, max_iters=2, bias_mode='penalty', lam=1.0)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), cfg)
    assert run.iterations == 2
    assert all(net.bias_shift == 0 for net in run.nets)


def test_origin_curvature_matches_riccati():
    benchmark = make_pendulum()
    system = benchmark.system
    cfg = ElmConfig(width=40, seed=0, max_iters=1, lambda_origin=1e8)
    run = run_elm_pi(system, initial_policy(benchmark), cfg)
    A, B, Qhat = linearize(system)
    P = solve_continuous_are(A, B, Qhat / 2, system.R)
    net = run.nets[0]
    np.testing.assert_allclose(net.hessian_origin(), 2 * P, rtol=1e-3, atol=1e-5)
    np.testing.assert_allclose(net.gradient(np.zeros(2)), [0.0, 0.0], atol=1e-5)
    assert run.records[0].flags == []


def test_policy_update_uses_latest_value():
    benchmark = make_synthetic(1)
    system = benchmark.system
    cfg = ElmConfig(width=15, seed=2, max_iters=2, lambda_origin=0.0)
    run = run_elm_pi(system, initial_policy(benchmark), cfg)
    base = init_random(cfg.width, 1, cfg.seed, cfg.activation, cfg.zero_bias)
    colloc = sample_collocation(system, cfg.collocation_count(1), cfg.seed, cfg.sampler)
    beta, _ = solve_ls(assemble(system, FeedbackPolicy(run.nets[0], system), base, colloc), cfg.rcond)
    np.testing.assert_allclose(run.nets[1].beta, beta, rtol=1e-10, atol=1e-12)


def _value_gap(benchmark, run, count=500):
    x = np.random.default_rng(0).uniform(benchmark.system.lower, benchmark.system.upper,
                                         (count, benchmark.system.state_dim))
    return run.nets[-1].value(x) - benchmark.reference_value(x, np)


def _max_increase(run):
    return max(r.max_increase for r in run.records[1:])


@pytest.mark.slow
def test_synthetic_accuracy():
    benchmark = make_synthetic(1)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), ElmConfig(width=50, seed=0),
                     _reference(benchmark), benchmark.name)
    assert run.final_test_error <= 1e-6
    assert _max_increase(run) <= 1e-6
    assert np.min(_value_gap(benchmark, run)) >= -1e-4


@pytest.mark.slow
def test_synthetic_accuracy_2d():
    benchmark = make_synthetic(2)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), ElmConfig(width=200, seed=0),
                     _reference(benchmark), benchmark.name)
    assert run.final_test_error <= 1e-4
    assert _max_increase(run) <= 1e-5
    assert np.min(_value_gap(benchmark, run)) >= -1e-4


@pytest.mark.slow
def test_synthetic_accuracy_3d():
    benchmark = make_synthetic(3)
    run = run_elm_pi(benchmark.system, initial_policy(benchmark), ElmConfig(width=800, seed=0),
                     _reference(benchmark), benchmark.name)
    assert run.final_test_error <= 1e-2
    assert _max_increase(run) <= 1e-2


@pytest.mark.slow
def test_lorenz_controller_stabilizes():
    benchmark = make_lorenz()
    system = benchmark.system
    run = run_elm_pi(system, initial_policy(benchmark), ElmConfig(width=400, seed=0), None, benchmark.name)
    assert run.status != 'diverged'
    policy = FeedbackPolicy(run.nets[-1], system)
    x0s = initial_states(-np.ones(3), np.ones(3), 10, seed=0)
    trajectories = simulate_batch(system, policy, x0s, T=benchmark.horizon)
    assert sum(converges(trajectory) for trajectory in trajectories) == 10


# endregion

def test_history(tmp_path):
    run = PiRun(algorithm='elm', benchmark='synthetic:1', width=3, points=3, seed=0)
    net = init_random(3, 1, seed=0)
    run.append(IterationRecord(iteration=1, residual_rms=0.5, sup_change=float('nan'), test_error=None,
                               max_increase=float('nan'), wall_ms=1.0, rank=3), net)
    with pytest.raises(AssertionError):
        run.append(IterationRecord(iteration=3, residual_rms=0.1, sup_change=0.1, test_error=None,
                                   max_increase=0.0, wall_ms=1.0), net)
    path = tmp_path / 'history.csv'
    save_history(run, str(path))
    header = path.read_text().splitlines()[0].split(',')
    assert header == ['iter', 'residual_rms', 'sup_change', 'test_error', 'max_increase', 'wall_ms', 'rank',
                      'initial_loss', 'final_loss', 'gain_penalty', 'flags']
    assert run.summary()['iterations'] == 1
