"""
ELM-PI: policy evaluation as a linear least-squares problem over the output weights of a random hidden layer,
alternated with policy improvement.

For a fixed policy kappa with closed-loop drift d(x) = f(x) + g(x) kappa(x), the GHJB residual of
V(x) = beta^T sigma(W x + b) is linear in beta:

    G(x_s) = sum_j beta_j sigma'(w_j . x_s + b_j) (w_j . d(x_s)) + L(x_s, kappa(x_s))

The gradient and the Hessian of V at the origin are linear in beta as well. Extra rows pin them to 0 and to the
Hessian 2 P of the value of the linearized closed loop, the least-squares counterpart of the PINN gain-matching term.
"""
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Optional

import numpy as np

import config
from dataset import evaluation_points, sample_collocation
from network import Activation, FeedbackPolicy, closed_loop_data, init_random
from systems import linearize
from .history import IterationRecord, PiRun, sup_norm
from .riccati import closed_loop_value_matrix

BIAS_MODES = ('subtract', 'penalty')


@dataclass(frozen=True)
class ElmConfig:
    width: int = 100
    seed: int = 0
    activation: str = config.ACTIVATION
    zero_bias: bool = False
    bias_mode: str = config.ELM_BIAS_MODE
    lam: float = config.ELM_LAMBDA
    ridge: float = config.ELM_RIDGE
    lambda_origin: float = config.ELM_LAMBDA_ORIGIN
    tol: float = config.ELM_TOL
    max_iters: int = config.PI_ITERATIONS
    resample: bool = False
    rcond: float = config.ELM_RCOND
    sampler: str = config.ELM_SAMPLER
    points: Optional[int] = None  # N, defaults to m * n

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f'width must be positive, got {self.width}.')
        if self.bias_mode not in BIAS_MODES:
            raise ValueError(f'bias_mode must be one of {BIAS_MODES}, got "{self.bias_mode}".')
        if self.lam < 0 or self.ridge < 0 or self.lambda_origin < 0:
            raise ValueError('lam, ridge and lambda_origin must be non-negative.')
        if self.tol <= 0 or self.rcond <= 0:
            raise ValueError('tol and rcond must be positive.')
        if self.max_iters < 1:
            raise ValueError(f'max_iters must be at least 1, got {self.max_iters}.')
        if self.points is not None and self.points < 1:
            raise ValueError(f'points must be positive, got {self.points}.')
        Activation(self.activation)

    def collocation_count(self, state_dim):
        return self.points if self.points is not None else self.width * state_dim


@dataclass(frozen=True, eq=False)
class LeastSquaresProblem:
    """ Rows [0, collocation_rows) are GHJB rows, the rest are the optional penalty and ridge rows. """
    A: np.ndarray
    t: np.ndarray
    collocation_rows: int

    def residual_rms(self, beta):
        rows = self.collocation_rows
        return float(np.sqrt(np.mean((self.A[:rows] @ beta - self.t[:rows]) ** 2)))


# region Policy evaluation ---------------------------------------------------------------------------------------------

def origin_rows(net, hessian_target=None):
    """
    Rows of DV(0) = 0 and, when a target is given, of the upper triangle of HessV(0) = hessian_target.

    :return: (rows [k, m], targets [k])
    """
    n = net.state_dim
    rows = [(net.activation.d1(net.b)[:, None] * net.W).T]
    targets = [np.zeros(n)]
    if hessian_target is not None:
        k, l = np.triu_indices(n)
        curvature = net.activation.d2(net.b)[:, None] * net.W
        rows.append((curvature[:, k] * net.W[:, l]).T)
        targets.append(np.asarray(hessian_target, dtype=np.float64)[k, l])
    return np.concatenate(rows), np.concatenate(targets)


def assemble(system, policy, net, colloc, lam=0.0, bias_mode=config.ELM_BIAS_MODE, ridge=0.0, lambda_origin=0.0,
             hessian_target=None):
    """
    Builds the least-squares problem of one policy evaluation step. `net.beta` is ignored.

    :param lam: Weight of the V(0)^2 penalty, used only in penalty mode.
    :param ridge: Weight of the ||beta||^2 regularizer, 0 disables it.
    :param lambda_origin: Weight of the origin rows relative to the mean squared GHJB residual, 0 disables them. They
                          are only added for smooth activations.
    :param hessian_target: Hessian the value should have at the origin, None pins the gradient only.
    """
    x = np.asarray(getattr(colloc, 'points', colloc), dtype=np.float64)
    drift, cost = closed_loop_data(system, policy, x)
    A = net.activation.d1(net.hidden(x)) * (drift @ net.W.T)
    t = -cost
    rows = A.shape[0]

    extra_rows, extra_targets = [], []
    if bias_mode == 'penalty' and lam > 0:
        extra_rows.append(np.sqrt(lam) * net.activation.sigma(net.b)[None, :])
        extra_targets.append(np.zeros(1))
    if lambda_origin > 0 and net.activation.smooth:
        weight = np.sqrt(lambda_origin * rows)
        origin, target = origin_rows(net, hessian_target)
        extra_rows.append(weight * origin)
        extra_targets.append(weight * target)
    if ridge > 0:
        extra_rows.append(np.sqrt(ridge) * np.eye(net.width))
        extra_targets.append(np.zeros(net.width))
    if extra_rows:
        A = np.concatenate([A] + extra_rows)
        t = np.concatenate([t] + extra_targets)
    return LeastSquaresProblem(A=A, t=t, collocation_rows=rows)


def solve_ls(problem: LeastSquaresProblem, rcond=config.ELM_RCOND):
    """
    Minimum-norm least-squares solution through the SVD, singular values below rcond * s_max are discarded.

    :return: (beta, effective rank)
    """
    if problem.A.shape[0] < 1:
        raise ValueError('The least-squares problem has no rows.')
    beta, _, rank, _ = np.linalg.lstsq(problem.A, problem.t, rcond=rcond)
    if rank < problem.A.shape[1]:
        logging.warning(f'Least-squares matrix is rank deficient: rank {rank} < m = {problem.A.shape[1]}.')
    return beta, int(rank)


# endregion

def run_elm_pi(system, initial_policy, cfg: ElmConfig, reference_value: Optional[Callable] = None,
               benchmark_name=None):
    """
    Policy iteration with ELM policy evaluation.

    :param system: ControlAffineSystem.
    :param initial_policy: Admissible policy kappa_0.
    :param cfg: ElmConfig.
    :param reference_value: Optional V*(x) on numpy arrays, used for the test error column.
    :return: PiRun with one record and one network per iteration.
    """
    n = system.state_dim
    count = cfg.collocation_count(n)
    run = PiRun(algorithm='elm', benchmark=benchmark_name or system.name, width=cfg.width, points=count,
                seed=cfg.seed)
    logging.info('===== ELM-PI =====')
    logging.info(f'{run.benchmark}: m={cfg.width} N={count} activation={cfg.activation} bias_mode={cfg.bias_mode} '
                 f'seed={cfg.seed}')

    test_x = evaluation_points(system, count, cfg.seed)
    reference = None if reference_value is None else np.asarray(reference_value(test_x), dtype=np.float64)

    base = init_random(cfg.width, n, cfg.seed, cfg.activation, cfg.zero_bias)
    colloc = sample_collocation(system, count, cfg.seed, cfg.sampler)
    use_origin = cfg.lambda_origin > 0 and base.activation.smooth
    if use_origin:
        A_lin, B_lin, Qhat = linearize(system)
    policy = initial_policy
    previous_values = None
    previous_rms = None

    for i in range(1, cfg.max_iters + 1):
        start = datetime.now()
        flags = []
        if cfg.resample and i > 1:
            base = init_random(cfg.width, n, cfg.seed, cfg.activation, cfg.zero_bias, index=i - 1)
            colloc = sample_collocation(system, count, cfg.seed, cfg.sampler, index=i - 1)

        hessian_target = None
        if use_origin:
            K = policy.jacobian_origin(n)
            P = closed_loop_value_matrix(A_lin, B_lin, Qhat, system.R, K)
            if P is None:
                logging.warning(f'Iteration {i}: A + B K is not Hurwitz for K = {np.round(K, 6).tolist()}, '
                                f'origin curvature not pinned.')
                flags.append('origin curvature dropped')
            else:
                hessian_target = 2 * P

        problem = assemble(system, policy, base, colloc, cfg.lam, cfg.bias_mode, cfg.ridge,
                           cfg.lambda_origin if use_origin else 0.0, hessian_target)
        beta, rank = solve_ls(problem, cfg.rcond)
        residual_rms = problem.residual_rms(beta)

        if previous_rms is not None and residual_rms > config.DIVERGENCE_FACTOR * max(previous_rms, 1e-8):
            logging.error(f'Iteration {i}: policy evaluation diverged (residual RMS {residual_rms:.3e} after '
                          f'{previous_rms:.3e}).')
            run.status = 'diverged'
            return run

        net = base.with_beta(beta)
        if cfg.bias_mode == 'subtract':
            net = net.normalized()

        values = net.value(test_x)
        if previous_values is None:
            sup_change, max_increase = float('nan'), float('nan')
        else:
            sup_change = sup_norm(values - previous_values)
            max_increase = float(np.max(values - previous_values))
        test_error = None if reference is None else sup_norm(values - reference)

        end = datetime.now()
        record = IterationRecord(iteration=i, residual_rms=residual_rms, sup_change=sup_change,
                                 test_error=test_error, max_increase=max_increase,
                                 wall_ms=(end - start).total_seconds() * 1000, rank=rank, flags=flags)
        run.append(record, net)
        logging.info(f'Iteration {i}: [{i}/{cfg.max_iters}] | Time: {end - start} | '
                     f'residual RMS = {residual_rms:.3e} sup change = {sup_change:.3e}'
                     + ('' if test_error is None else f' test error = {test_error:.3e}'))

        policy = FeedbackPolicy(net, system)
        previous_values, previous_rms = values, residual_rms
        if i >= 2 and sup_change < cfg.tol:
            run.status = 'converged'
            break
    else:
        run.status = 'max_iters'

    logging.info(f'ELM-PI finished: {run.status} after {run.iterations} iterations in {run.wall_ms:.1f} ms.')
    return run
