"""
PINN-PI: policy evaluation by Adam on the GHJB residual loss, plus a gain-matching term that ties the Jacobian of the
improved policy at the origin to the Lyapunov-equation gain of the linearized closed loop.

Gradients are the closed-form ones of `network.loss`; torch only holds the parameters and the optimizer state.
"""
import logging
import os
from dataclasses import dataclass
from datetime import datetime
from typing import Callable, Optional

import numpy as np
import torch
from torch.optim import Adam

import config
from dataset import evaluation_points, generator, sample_collocation
from network import Activation, FeedbackPolicy, PolicyEvaluationLoss, ValueNet, init_random, save_net
from systems import linearize
from .history import IterationRecord, PiRun, sup_norm
from .riccati import closed_loop_value_matrix, gain_update


@dataclass(frozen=True)
class TrainConfig:
    width: int = 100
    seed: int = 0
    steps_per_iter: int = config.STEPS_PER_ITER
    learning_rate: float = config.LEARNING_RATE
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    lambda_origin: float = config.LAMBDA_ORIGIN
    lambda_gain: float = config.LAMBDA_GAIN
    batch: Optional[int] = None  # None means full batch
    log_every: int = config.LOG_EVERY
    max_iters: int = config.PI_ITERATIONS
    sampler: str = config.ELM_SAMPLER
    points: Optional[int] = None

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f'width must be positive, got {self.width}.')
        if self.steps_per_iter < 1:
            raise ValueError(f'steps_per_iter must be at least 1, got {self.steps_per_iter}.')
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ValueError('learning_rate and eps must be positive.')
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError('Adam betas must lie in [0, 1).')
        if self.lambda_origin < 0 or self.lambda_gain < 0:
            raise ValueError('Loss weights must be non-negative.')
        if self.batch is not None and self.batch < 1:
            raise ValueError(f'batch must be positive, got {self.batch}.')
        if self.log_every < 1 or self.max_iters < 1:
            raise ValueError('log_every and max_iters must be at least 1.')

    def collocation_count(self, state_dim):
        return self.points if self.points is not None else self.width * state_dim


# region Optimizer -----------------------------------------------------------------------------------------------------

class AdamState:
    """ Float64 parameters and the torch Adam moments attached to them. """

    def __init__(self, params, cfg: TrainConfig):
        self.params = {name: torch.nn.Parameter(torch.tensor(np.asarray(value, dtype=np.float64)))
                       for name, value in params.items()}
        self.optimizer = Adam(
            params=list(self.params.values()),
            lr=cfg.learning_rate,
            betas=(cfg.beta1, cfg.beta2),
            eps=cfg.eps,
        )
        self.step = 0

    @classmethod
    def for_net(cls, net: ValueNet, cfg: TrainConfig):
        return cls({'W': net.W, 'b': net.b, 'beta': net.beta}, cfg)

    def arrays(self):
        return {name: p.detach().numpy().copy() for name, p in self.params.items()}

    def net(self, activation=Activation.TANH):
        arrays = self.arrays()
        return ValueNet(W=arrays['W'], b=arrays['b'], beta=arrays['beta'], activation=activation)


def adam_step(state: AdamState, gradient, cfg: TrainConfig = None):
    """
    One bias-corrected Adam update. `gradient` maps parameter names to arrays (a ParamGradient works).

    :return: the updated parameters as numpy arrays.
    """
    items = gradient._asdict() if hasattr(gradient, '_asdict') else gradient
    for name, p in state.params.items():
        p.grad = torch.as_tensor(np.asarray(items[name], dtype=np.float64).reshape(p.shape))
    state.optimizer.step()
    state.step += 1
    return state.arrays()


# endregion

def target_gain(A, B, Qhat, R, K):
    """ Gain that the next policy should have at the origin, -R^-1 B^T P with P from `closed_loop_value_matrix`. """
    P = closed_loop_value_matrix(A, B, Qhat, R, K)
    return None if P is None else gain_update(P, B, R)


def run_pinn_pi(system, initial_policy, cfg: TrainConfig, reference_value: Optional[Callable] = None,
                benchmark_name=None, checkpoint_dir=None):
    """
    Policy iteration with PINN policy evaluation. Network parameters are carried over from one PI iteration to the
    next, the Adam moments are reset and fresh collocation points are drawn at every iteration.

    :param system: ControlAffineSystem.
    :param initial_policy: Admissible policy kappa_0.
    :param cfg: TrainConfig.
    :param reference_value: Optional V*(x) on numpy arrays, used for the test error column.
    :param checkpoint_dir: If given, the network of each iteration is saved there.
    :return: PiRun.
    """
    n = system.state_dim
    count = cfg.collocation_count(n)
    run = PiRun(algorithm='pinn', benchmark=benchmark_name or system.name, width=cfg.width, points=count,
                seed=cfg.seed)
    logging.info('===== PINN-PI =====')
    logging.info(f'{run.benchmark}: m={cfg.width} N={count} steps={cfg.steps_per_iter} lr={cfg.learning_rate} '
                 f'batch={cfg.batch or "full"} seed={cfg.seed}')

    test_x = evaluation_points(system, count, cfg.seed)
    reference = None if reference_value is None else np.asarray(reference_value(test_x), dtype=np.float64)

    A, B, Qhat = linearize(system)
    use_gain = cfg.lambda_gain > 0 and np.any(B != 0)
    if cfg.lambda_gain > 0 and not use_gain:
        logging.warning(f'{run.benchmark}: input matrix vanishes at the origin, gain matching disabled.')

    raw = init_random(cfg.width, n, cfg.seed, Activation.TANH)
    policy = initial_policy
    previous_values = None

    for i in range(1, cfg.max_iters + 1):
        start = datetime.now()
        flags = []

        target = None
        if use_gain:
            K = policy.jacobian_origin(n)
            target = target_gain(A, B, Qhat, system.R, K)
            if target is None:
                logging.warning(f'Iteration {i}: A + B K is not Hurwitz for K = {np.round(K, 6).tolist()}, '
                                f'gain term dropped.')
                flags.append('gain term dropped')

        colloc = sample_collocation(system, count, cfg.seed, cfg.sampler, index=i - 1)
        objective = PolicyEvaluationLoss(system, policy, colloc.points, target, cfg.lambda_origin, cfg.lambda_gain)
        initial_loss = objective(raw)

        # region TRAINING LOOP -----------------------------------------------------------------------------------------
        state = AdamState.for_net(raw, cfg)
        rng = generator(cfg.seed, 'minibatch', i - 1)
        net = raw
        for step in range(1, cfg.steps_per_iter + 1):
            index = None
            if cfg.batch is not None and cfg.batch < len(colloc):
                index = np.sort(rng.choice(len(colloc), size=cfg.batch, replace=False))
            adam_step(state, objective.gradient(net, index), cfg)
            net = state.net()

            if step % cfg.log_every == 0 or step == cfg.steps_per_iter:
                breakdown = objective(net)
                error = None if reference is None else sup_norm(net.normalized().value(test_x) - reference)
                run.steps.append({'iter': i, 'step': step, 'residual_mse': breakdown.residual_mse,
                                  'origin_penalty': breakdown.origin_penalty,
                                  'gain_penalty': breakdown.gain_penalty, 'test_error': error})
                logging.debug(f'Iteration {i}: [{step}/{cfg.steps_per_iter}] | Loss = {breakdown.total:.4e}')
        # endregion

        final_loss = objective(net)
        if final_loss.total > initial_loss.total:
            logging.warning(f'Iteration {i}: non-decreasing loss ({initial_loss.total:.4e} -> '
                            f'{final_loss.total:.4e}).')
            flags.append('non-decreasing loss')

        raw = net
        improved = net.normalized()
        values = improved.value(test_x)
        if previous_values is None:
            sup_change, max_increase = float('nan'), float('nan')
        else:
            sup_change = sup_norm(values - previous_values)
            max_increase = float(np.max(values - previous_values))
        test_error = None if reference is None else sup_norm(values - reference)

        end = datetime.now()
        record = IterationRecord(iteration=i, residual_rms=float(np.sqrt(final_loss.residual_mse)),
                                 sup_change=sup_change, test_error=test_error, max_increase=max_increase,
                                 wall_ms=(end - start).total_seconds() * 1000, initial_loss=initial_loss.total,
                                 final_loss=final_loss.total, gain_penalty=final_loss.gain_penalty, flags=flags)
        run.append(record, improved)
        logging.info(f'Iteration {i}: [{i}/{cfg.max_iters}] | Time: {end - start} | '
                     f'Loss = {initial_loss.total:.4e} -> {final_loss.total:.4e}'
                     + ('' if test_error is None else f' test error = {test_error:.3e}'))

        if checkpoint_dir is not None:
            save_net(improved, os.path.join(checkpoint_dir, f'net_iter{i:02d}.json'))

        policy = FeedbackPolicy(improved, system)
        previous_values = values

    run.status = 'max_iters'
    logging.info(f'PINN-PI finished after {run.iterations} iterations in {run.wall_ms:.1f} ms.')
    return run
