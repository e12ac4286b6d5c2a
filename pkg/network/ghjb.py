"""
Residuals of the policy evaluation equation (GHJB) and of the optimal HJB equation.

    GHJB:  Q(x) + kappa^T R kappa + DV(x) (f(x) + g(x) kappa(x)) = 0
    HJB:  -Q(x) - DV(x) f(x) + 1/4 DV(x) g(x) R^-1 g(x)^T DV(x)^T = 0
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ResidualSample:
    x: np.ndarray
    residual: np.ndarray
    drift_closed: np.ndarray
    running_cost: np.ndarray


def closed_loop_data(system, policy, x):
    """ Closed-loop drift f + g kappa and running cost Q + kappa^T R kappa for a fixed policy. """
    x = np.asarray(x, dtype=np.float64)
    u = policy(x)
    return system.closed_loop(x, u), system.running_cost(x, u)


def ghjb_residual(system, policy, net, x):
    drift, cost = closed_loop_data(system, policy, x)
    residual = cost + np.einsum('...i,...i->...', net.gradient(x), drift)
    return ResidualSample(x=np.asarray(x, dtype=np.float64), residual=residual, drift_closed=drift,
                          running_cost=cost)


def hjb_residual(system, net, x):
    x = np.asarray(x, dtype=np.float64)
    dv = net.gradient(x)
    y = np.einsum('...kj,...k->...j', system.input_matrix(x), dv)
    return (-system.cost(x) - np.einsum('...i,...i->...', dv, system.drift(x))
            + 0.25 * np.einsum('...i,ij,...j->...', y, system.R_inv, y))
