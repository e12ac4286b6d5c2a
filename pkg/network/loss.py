"""
Training loss of PINN policy evaluation and its exact gradient with respect to (W, b, beta).

    total = mean_s(G(x_s)^2) + lambda_origin * V(0)^2 + lambda_gain * ||D kappa(0) - K_target||_F^2

where G is the GHJB residual for the fixed policy being evaluated.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ghjb import closed_loop_data
from .network import Activation
from .policy import policy_jacobian_origin


@dataclass(frozen=True)
class LossBreakdown:
    residual_mse: float
    origin_penalty: float
    gain_penalty: float
    total: float


class ParamGradient(NamedTuple):
    W: np.ndarray
    b: np.ndarray
    beta: np.ndarray

    def flat(self):
        return np.concatenate([self.W.reshape(-1), self.b, self.beta])


class PolicyEvaluationLoss:
    """
    Loss for one PI iteration. The closed-loop drift and running cost only depend on the policy and the collocation
    points, so they are computed once here and reused at every optimizer step.
    """

    def __init__(self, system, policy, points, target_gain=None, lambda_origin=1.0, lambda_gain=1.0):
        self.system = system
        self.points = np.asarray(points, dtype=np.float64)
        assert self.points.ndim == 2 and self.points.shape[0] > 0, 'At least one collocation point is needed.'
        self.drift, self.cost = closed_loop_data(system, policy, self.points)
        self.target_gain = None if target_gain is None else np.atleast_2d(np.asarray(target_gain, dtype=np.float64))
        self.lambda_origin = lambda_origin
        self.lambda_gain = lambda_gain if self.target_gain is not None else 0.0

    def _subset(self, index):
        if index is None:
            return self.points, self.drift, self.cost
        return self.points[index], self.drift[index], self.cost[index]

    def residuals(self, net, index=None):
        x, drift, cost = self._subset(index)
        return cost + np.einsum('si,si->s', net.gradient(x), drift)

    def __call__(self, net, index=None):
        residual_mse = float(np.mean(self.residuals(net, index) ** 2))
        origin_penalty = float(net.value(np.zeros(self.system.state_dim))) ** 2
        gain_penalty = 0.0
        if self.target_gain is not None:
            error = policy_jacobian_origin(net, self.system) - self.target_gain
            gain_penalty = float(np.sum(error ** 2))
        total = residual_mse + self.lambda_origin * origin_penalty + self.lambda_gain * gain_penalty
        return LossBreakdown(residual_mse, origin_penalty, gain_penalty, total)

    def gradient(self, net, index=None):
        if net.activation is not Activation.TANH:
            raise ValueError('Loss gradients are only available for tanh networks.')
        act = net.activation
        W, b, beta = net.W, net.b, net.beta
        x, drift, cost = self._subset(index)

        # Residual: G_s = c_s + sum_j beta_j sigma'(z_sj) (w_j . d_s)
        z = x @ W.T + b
        s1, s2 = act.d1(z), act.d2(z)
        a = drift @ W.T
        residual = cost + (s1 * a) @ beta
        coef = 2.0 * residual / x.shape[0]

        g_beta = coef @ (s1 * a)
        g_b = beta * (coef @ (s2 * a))
        g_W = beta[:, None] * ((coef[:, None] * s2 * a).T @ x + (coef[:, None] * s1).T @ drift)

        # Origin penalty: (beta^T sigma(b) - shift)^2
        v0 = float(act.sigma(b) @ beta) - net.bias_shift
        g_beta = g_beta + self.lambda_origin * 2.0 * v0 * act.sigma(b)
        g_b = g_b + self.lambda_origin * 2.0 * v0 * beta * act.d1(b)

        # Gain matching: K(theta) = -1/2 R^-1 (B^T H + C(v)), H = sum_j beta_j sigma''(b_j) w_j w_j^T,
        # v = DV(0), C(v)_ik = sum_l Dg_lik v_l
        if self.lambda_gain > 0:
            system = self.system
            error = policy_jacobian_origin(net, system) - self.target_gain
            scaled = -0.5 * system.R_inv @ error
            S = system.input_matrix(np.zeros(system.state_dim)) @ scaled
            u = np.einsum('ik,lik->l', scaled, system.input_jacobian_origin)
            quad = np.einsum('jk,kl,jl->j', W, S, W)
            wu = W @ u
            d1b, d2b, d3b = act.d1(b), act.d2(b), act.d3(b)
            weight = 2.0 * self.lambda_gain
            g_beta = g_beta + weight * (d2b * quad + d1b * wu)
            g_b = g_b + weight * beta * (d3b * quad + d2b * wu)
            g_W = g_W + weight * ((beta * d2b)[:, None] * (W @ (S + S.T).T) + (beta * d1b)[:, None] * u[None, :])

        return ParamGradient(W=g_W, b=g_b, beta=g_beta)


def loss(system, policy, net, colloc, target_gain, cfg) -> LossBreakdown:
    points = getattr(colloc, 'points', colloc)
    return PolicyEvaluationLoss(system, policy, points, target_gain, cfg.lambda_origin, cfg.lambda_gain)(net)


def loss_gradient(system, policy, net, colloc, target_gain, cfg) -> ParamGradient:
    points = getattr(colloc, 'points', colloc)
    objective = PolicyEvaluationLoss(system, policy, points, target_gain, cfg.lambda_origin, cfg.lambda_gain)
    return objective.gradient(net)
