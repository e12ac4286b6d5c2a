""" Control-affine systems x' = f(x) + g(x) u with running cost Q(x) + u^T R u. """
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np

import config


class LinearizationMismatchError(ValueError):
    pass


# Evaluation maps take an array of states with shape [..., n] and an array namespace `xp`. The namespace is numpy
# for point evaluation, `verification.interval` for enclosures and an object-array shim for symbolic export.
DriftMap = Callable[..., object]


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """
    Dynamics and cost of an infinite-horizon control problem.

    `f(x, xp)` returns [..., n], `g(x, xp)` returns [..., n, m] and `q(x, xp)` returns [...]. `R` is a constant
    symmetric positive definite matrix. The box `lower <= x <= upper` is the region of interest and must contain the
    origin in its interior.
    """
    name: str
    state_dim: int
    input_dim: int
    f: DriftMap
    g: DriftMap
    q: DriftMap
    R: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    Qhat: Optional[np.ndarray] = None
    g_const: Optional[np.ndarray] = None
    R_chol: np.ndarray = field(init=False, repr=False)
    R_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, m = self.state_dim, self.input_dim
        if n < 1 or m < 1:
            raise ValueError(f'{self.name}: state and input dimensions must be positive, got n={n} m={m}.')

        R = np.atleast_2d(np.asarray(self.R, dtype=np.float64))
        if R.shape != (m, m) or not np.allclose(R, R.T):
            raise ValueError(f'{self.name}: R must be a symmetric {m}x{m} matrix.')
        try:
            chol = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValueError(f'{self.name}: R is not positive definite.')

        lower = np.asarray(self.lower, dtype=np.float64).reshape(n)
        upper = np.asarray(self.upper, dtype=np.float64).reshape(n)
        if not np.all(lower < 0) or not np.all(upper > 0):
            raise ValueError(f'{self.name}: the origin must be strictly inside the domain box.')

        object.__setattr__(self, 'R', R)
        object.__setattr__(self, 'R_chol', chol)
        object.__setattr__(self, 'R_inv', np.linalg.inv(R))
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        for key in ('A', 'B', 'Qhat', 'g_const'):
            value = getattr(self, key)
            if value is not None:
                object.__setattr__(self, key, np.asarray(value, dtype=np.float64))

        origin = np.zeros(n)
        if np.any(self.drift(origin) != 0):
            raise ValueError(f'{self.name}: f(0) must be exactly zero.')
        if self.cost(origin) != 0:
            raise ValueError(f'{self.name}: Q(0) must be exactly zero.')

    # region Evaluation ------------------------------------------------------------------------------------------------

    def drift(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=np.float64), np), dtype=np.float64)

    def input_matrix(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.g_const is not None:
            return np.broadcast_to(self.g_const, x.shape[:-1] + self.g_const.shape)
        return np.asarray(self.g(x, np), dtype=np.float64)

    def cost(self, x):
        return np.asarray(self.q(np.asarray(x, dtype=np.float64), np), dtype=np.float64)

    def closed_loop(self, x, u):
        """ f(x) + g(x) u for states [..., n] and inputs [..., m]. """
        return self.drift(x) + np.einsum('...ij,...j->...i', self.input_matrix(x), u)

    def running_cost(self, x, u):
        """ L(x, u) = Q(x) + u^T R u. """
        return self.cost(x) + np.einsum('...i,ij,...j->...', u, self.R, u)

    # endregion

    @property
    def widths(self):
        return self.upper - self.lower

    @cached_property
    def input_jacobian_origin(self):
        """ Dg(0) as an array [n, m, n]: entry [l, i, k] is d g_li / d x_k at the origin. """
        n = self.state_dim
        if self.g_const is not None:
            return np.zeros((n, self.input_dim, n))
        h = config.FD_STEP_POLICY
        steps = np.eye(n) * h
        forward = self.input_matrix(steps)
        backward = self.input_matrix(-steps)
        return np.moveaxis((forward - backward) / (2 * h), 0, -1)


def linearize(system: ControlAffineSystem) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Linearization data at the origin: A = Df(0), B = g(0) and Qhat = Hessian of Q at 0.

    Finite differences (central, step FD_STEP_LINEARIZE) are always computed. When the system also stores analytic
    data, both must agree to LINEARIZE_TOL or LinearizationMismatchError is raised.
    """
    n = system.state_dim
    h = config.FD_STEP_LINEARIZE
    origin = np.zeros(n)
    steps = np.eye(n) * h

    A_fd = ((system.drift(steps) - system.drift(-steps)) / (2 * h)).T
    B = system.input_matrix(origin).copy()

    Qhat_fd = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            e_i, e_j = steps[i], steps[j]
            Qhat_fd[i, j] = (system.cost(e_i + e_j) - system.cost(e_i - e_j)
                             - system.cost(-e_i + e_j) + system.cost(-e_i - e_j)) / (4 * h * h)
    Qhat_fd = (Qhat_fd + Qhat_fd.T) / 2

    for label, analytic, estimate in (('A', system.A, A_fd), ('B', system.B, B), ('Qhat', system.Qhat, Qhat_fd)):
        if analytic is not None and not np.allclose(analytic, estimate, rtol=config.LINEARIZE_TOL,
                                                    atol=config.LINEARIZE_TOL):
            raise LinearizationMismatchError(
                f'{system.name}: finite-difference {label} disagrees with the analytic value:\n'
                f'{estimate}\nvs\n{analytic}')

    A = system.A if system.A is not None else A_fd
    B = system.B if system.B is not None else B
    Qhat = system.Qhat if system.Qhat is not None else Qhat_fd
    logging.debug(f'Linearized {system.name}: A={A.tolist()} B={B.tolist()} Qhat={Qhat.tolist()}')
    return A, B, Qhat
