""" Initial admissible policies for policy iteration. """
import logging

import numpy as np
from scipy.signal import place_poles

from network import FunctionPolicy, LinearPolicy
from systems import linearize
from .riccati import NotHurwitzError, ResonantSpectrumError, kleinman


def seed_gain(A, B):
    """ Gain placing the closed-loop poles of the linearization at -1, ..., -n, with the sign convention u = K x. """
    n = A.shape[0]
    poles = -np.arange(1.0, n + 1.0)
    placed = place_poles(A, B, poles)
    return -placed.gain_matrix


def lqr_gain(benchmark):
    """
    LQR gain of the linearized problem by Kleinman's iteration started from `seed_gain`. The quadratic cost weight
    is Qhat / 2 so that x^T P x is the second order term of the value function. When Kleinman cannot run, the seed
    gain is returned.
    """
    system = benchmark.system
    A, B, Qhat = linearize(system)
    K0 = seed_gain(A, B)
    try:
        _, K = kleinman(A, B, Qhat / 2, system.R, K0)
    except (NotHurwitzError, ResonantSpectrumError) as e:
        logging.warning(f'{system.name}: Kleinman iteration failed ({e}), using the seed gain {K0.tolist()}.')
        return K0
    return K


def initial_policy(benchmark):
    """ Builtin warm start of the benchmark when it has one, the linear LQR policy otherwise. """
    if benchmark.initial_policy is not None:
        logging.info(f'{benchmark.name}: using the builtin initial policy.')
        return FunctionPolicy(benchmark.initial_policy)
    if benchmark.uncontrollable_linearization:
        raise ValueError(f'{benchmark.name} has an uncontrollable linearization and no builtin initial policy.')
    K = lqr_gain(benchmark)
    logging.info(f'{benchmark.name}: initial policy u = K x with K = {np.round(K, 6).tolist()}')
    return LinearPolicy(K)
