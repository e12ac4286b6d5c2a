""" One-hidden-layer value networks V(x) = beta^T sigma(W x + b) - bias_shift with closed-form derivatives. """
import json
import logging
import os
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

import config
from dataset import generator


class Activation(str, Enum):
    TANH = 'tanh'
    RELU = 'relu'

    def sigma(self, z):
        if self is Activation.TANH:
            return np.tanh(z)
        return np.maximum(z, 0.0)

    def d1(self, z):
        if self is Activation.TANH:
            return 1.0 - np.tanh(z) ** 2
        # sigma'(0) := 0
        return (z > 0).astype(np.float64)

    def d2(self, z):
        if self is Activation.TANH:
            t = np.tanh(z)
            return -2.0 * t * (1.0 - t ** 2)
        return np.zeros_like(np.asarray(z, dtype=np.float64))

    def d3(self, z):
        if self is Activation.TANH:
            t = np.tanh(z)
            return (1.0 - t ** 2) * (6.0 * t ** 2 - 2.0)
        return np.zeros_like(np.asarray(z, dtype=np.float64))

    @property
    def smooth(self):
        return self is Activation.TANH


@dataclass(frozen=True, eq=False)
class ValueNet:
    """
    Immutable one-layer network. Rows of W are the hidden weights w_j, so the hidden pre-activation is z = W x + b.
    Every method accepts states with shape [..., n].
    """
    W: np.ndarray
    b: np.ndarray
    beta: np.ndarray
    activation: Activation = Activation.TANH
    bias_shift: float = 0.0

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=np.float64))
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        assert b.shape[0] == W.shape[0] and beta.shape[0] == W.shape[0], \
            f'W {W.shape}, b {b.shape} and beta {beta.shape} do not describe the same hidden layer.'
        object.__setattr__(self, 'W', W)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'activation', Activation(self.activation))
        object.__setattr__(self, 'bias_shift', float(self.bias_shift))

    @property
    def width(self):
        return self.W.shape[0]

    @property
    def state_dim(self):
        return self.W.shape[1]

    def hidden(self, x):
        return np.asarray(x, dtype=np.float64) @ self.W.T + self.b

    def value(self, x):
        return self.activation.sigma(self.hidden(x)) @ self.beta - self.bias_shift

    def gradient(self, x):
        """ DV(x) = beta^T diag(sigma'(W x + b)) W, one row per state. """
        return (self.activation.d1(self.hidden(x)) * self.beta) @ self.W

    def hessian_origin(self):
        """ Hessian of V at the origin, sum_j beta_j sigma''(b_j) w_j w_j^T. """
        if not self.activation.smooth:
            raise ValueError('The Hessian at the origin needs a twice differentiable activation.')
        return self.W.T @ ((self.beta * self.activation.d2(self.b))[:, None] * self.W)

    def raw_origin_value(self):
        return float(self.activation.sigma(self.b) @ self.beta)

    def with_beta(self, beta):
        return replace(self, beta=np.array(beta, dtype=np.float64))

    def normalized(self):
        """ Same network with bias_shift chosen so that V(0) = 0. """
        return replace(self, bias_shift=self.raw_origin_value())


class AnalyticNet:
    """
    Wraps a closed-form V and DV (written against an array namespace) in the network interface so reference value
    functions flow through the same residual, policy and verification code as trained networks.
    """
    activation = None
    bias_shift = 0.0

    def __init__(self, value_fn: Callable, gradient_fn: Callable, state_dim: int,
                 hessian: Optional[np.ndarray] = None):
        self.value_fn = value_fn
        self.gradient_fn = gradient_fn
        self.state_dim = state_dim
        self.hessian = None if hessian is None else np.asarray(hessian, dtype=np.float64)

    @classmethod
    def from_benchmark(cls, benchmark):
        assert benchmark.reference_value is not None, f'{benchmark.name} has no reference value function.'
        return cls(benchmark.reference_value, benchmark.reference_gradient, benchmark.system.state_dim)

    def value(self, x, xp=np):
        if xp is np:
            return np.asarray(self.value_fn(np.asarray(x, dtype=np.float64), np), dtype=np.float64)
        return self.value_fn(x, xp)

    def gradient(self, x, xp=np):
        if xp is np:
            x = np.asarray(x, dtype=np.float64)
            return np.broadcast_to(np.asarray(self.gradient_fn(x, np), dtype=np.float64), x.shape)
        return self.gradient_fn(x, xp)

    def hessian_origin(self):
        if self.hessian is not None:
            return self.hessian
        h = config.FD_STEP_POLICY
        steps = np.eye(self.state_dim) * h
        estimate = (self.gradient(steps) - self.gradient(-steps)) / (2 * h)
        return (estimate + estimate.T) / 2


def init_random(width, state_dim, seed, activation=Activation.TANH, zero_bias=False, index=0):
    """
    Draws W and b i.i.d. uniform on [-1, 1] from the "weights" stream of the seed. beta and bias_shift start at 0.

    :param width: Number of hidden units m.
    :param state_dim: State dimension n.
    :param seed: Run seed.
    :param activation: Activation or its name.
    :param zero_bias: If True, b is set to zero (used with ReLU on the bilinear problem).
    :param index: Stream counter, incremented when hidden layers are redrawn during a run.
    """
    if width < 1 or state_dim < 1:
        raise ValueError(f'Width and state dimension must be positive, got m={width} n={state_dim}.')
    rng = generator(seed, 'weights', index)
    W = rng.uniform(-1.0, 1.0, size=(width, state_dim))
    b = rng.uniform(-1.0, 1.0, size=width)
    if zero_bias:
        b = np.zeros(width)
    return ValueNet(W=W, b=b, beta=np.zeros(width), activation=Activation(activation))


# region Serialization

def to_record(net: ValueNet):
    return {
        'activation': net.activation.value,
        'n': net.state_dim,
        'm': net.width,
        'W': net.W.reshape(-1).tolist(),
        'b': net.b.tolist(),
        'beta': net.beta.tolist(),
        'bias_shift': net.bias_shift,
    }


def from_record(record):
    try:
        n, m = int(record['n']), int(record['m'])
        W = np.array(record['W'], dtype=np.float64).reshape(m, n)
        return ValueNet(W=W, b=record['b'], beta=record['beta'], activation=record['activation'],
                        bias_shift=record['bias_shift'])
    except (KeyError, TypeError, ValueError, AssertionError) as e:
        raise ValueError(f'Malformed value network record: {e}')


def save_net(net: ValueNet, path):
    directory = os.path.dirname(path)
    if directory and not os.path.isdir(directory):
        os.makedirs(directory)
    with open(path, 'w') as file:
        json.dump(to_record(net), file, indent=1)
    logging.info(f'Network saved: {path}')


def load_net(path):
    with open(path) as file:
        try:
            record = json.load(file)
        except json.JSONDecodeError as e:
            raise ValueError(f'{path} is not a valid network file: {e}')
    return from_record(record)

# endregion
