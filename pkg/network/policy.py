""" Feedback policies, including the policy induced by a value function: kappa(x) = -1/2 R^-1 g(x)^T DV(x)^T. """
import numpy as np

import config
from .network import Activation


def policy(net, system, x):
    """
    Improved policy for a value network, evaluated at states [..., n]. Exactly zero at the origin.
    """
    x = np.asarray(x, dtype=np.float64)
    dv = net.gradient(x)
    u = -0.5 * np.einsum('ij,...kj,...k->...i', system.R_inv, system.input_matrix(x), dv)
    at_origin = np.all(x == 0, axis=-1)
    return np.where(at_origin[..., None], 0.0, u)


def policy_jacobian_origin(net, system):
    """
    D kappa(0) as an [m, n] matrix: -1/2 R^-1 (B^T HessV(0) + Dg(0)^T acting on DV(0)).
    """
    if getattr(net, 'activation', None) is Activation.RELU:
        raise ValueError('The policy Jacobian at the origin needs a twice differentiable activation.')
    n = system.state_dim
    hessian = net.hessian_origin()
    dv0 = net.gradient(np.zeros(n)).reshape(n)
    B = system.input_matrix(np.zeros(n))
    term = B.T @ hessian + np.einsum('lik,l->ik', system.input_jacobian_origin, dv0)
    return -0.5 * system.R_inv @ term


class Policy:
    """ A state feedback u = kappa(x) for states [..., n]. """

    def __call__(self, x):
        raise NotImplementedError()

    def jacobian_origin(self, state_dim):
        h = config.FD_STEP_POLICY
        steps = np.eye(state_dim) * h
        return ((self(steps) - self(-steps)) / (2 * h)).T


class LinearPolicy(Policy):
    def __init__(self, K):
        self.K = np.atleast_2d(np.asarray(K, dtype=np.float64))

    def __call__(self, x):
        return np.asarray(x, dtype=np.float64) @ self.K.T

    def jacobian_origin(self, state_dim=None):
        return self.K


class FeedbackPolicy(Policy):
    """ Policy improvement step for a value network on a system. """

    def __init__(self, net, system):
        self.net = net
        self.system = system

    def __call__(self, x):
        return policy(self.net, self.system, x)

    def jacobian_origin(self, state_dim=None):
        return policy_jacobian_origin(self.net, self.system)


class FunctionPolicy(Policy):
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)
