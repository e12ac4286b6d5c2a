"""
Benchmark problems: the n-dimensional synthetic problem with a known value function, the scalar bilinear problem, the
inverted pendulum and the controlled Lorenz system.

Dynamics, costs and value functions are written against an array namespace `xp` so the same definition serves point
evaluation (numpy), interval enclosures and symbolic export.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import config
from .systems import ControlAffineSystem


@dataclass(frozen=True, eq=False)
class Benchmark:
    name: str
    system: ControlAffineSystem
    reference_value: Optional[Callable] = None  # V*(x, xp)
    reference_gradient: Optional[Callable] = None  # DV*(x, xp)
    reference_policy: Optional[Callable] = None  # kappa*(x), numpy only
    initial_policy: Optional[Callable] = None  # builtin warm start, numpy only
    uncontrollable_linearization: bool = False
    horizon: float = config.SIM_HORIZON


def _constant_field(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)

    def g(x, xp):
        return xp.broadcast_to(matrix, x.shape[:-1] + matrix.shape)

    return g


# region Synthetic -----------------------------------------------------------------------------------------------------

def make_synthetic(n):
    """
    x_i' = x_i^3 + u_i with Q(x) = sum(x_i^2 + 2 x_i^4), R = I on [-1, 1]^n. The optimal value function is
    V*(x) = sum(x_i^4 / 2 + (x_i^2 + 1)^2 / 2 - 1/2) with feedback u_i = -2 x_i^3 - x_i.

    The warm start u_i = -x_i^3 - x_i gives x_i' = -x_i on the whole domain. Its value sum(x_i^2 + x_i^4 + x_i^6 / 6)
    lies above V*. The linear gain -1 alone would not do: it leaves equilibria at x_i = +-1 on the domain boundary.
    """
    if n < 1:
        raise ValueError(f'The synthetic benchmark needs n >= 1, got {n}.')

    def f(x, xp):
        return x ** 3

    def q(x, xp):
        return xp.sum(x ** 2 + 2 * x ** 4, axis=-1)

    def value(x, xp):
        return xp.sum(0.5 * x ** 4 + 0.5 * (x ** 2 + 1) ** 2 - 0.5, axis=-1)

    def gradient(x, xp):
        return 4 * x ** 3 + 2 * x

    def policy(x):
        x = np.asarray(x, dtype=np.float64)
        return -2 * x ** 3 - x

    def initial(x):
        x = np.asarray(x, dtype=np.float64)
        return -x ** 3 - x

    eye = np.eye(n)
    system = ControlAffineSystem(
        name=f'synthetic:{n}',
        state_dim=n,
        input_dim=n,
        f=f,
        g=_constant_field(eye),
        q=q,
        R=eye,
        lower=-np.ones(n),
        upper=np.ones(n),
        A=np.zeros((n, n)),
        B=eye,
        Qhat=2 * eye,
        g_const=eye,
    )
    return Benchmark(system.name, system, reference_value=value, reference_gradient=gradient,
                     reference_policy=policy, initial_policy=initial)


# endregion

# region Bilinear ------------------------------------------------------------------------------------------------------

def make_bilinear():
    """ x' = x u with Q = x^2, R = 1 on [-1, 1]. V*(x) = 2|x| is not differentiable at the origin. """

    def f(x, xp):
        return 0 * x

    def g(x, xp):
        return x[..., None]

    def q(x, xp):
        return xp.sum(x ** 2, axis=-1)

    def value(x, xp):
        return xp.sum(2 * xp.abs(x), axis=-1)

    def gradient(x, xp):
        return 2 * xp.sign(x)

    def policy(x):
        return -np.abs(np.asarray(x, dtype=np.float64))

    def initial(x):
        return -0.5 * np.abs(np.asarray(x, dtype=np.float64))

    system = ControlAffineSystem(
        name='bilinear',
        state_dim=1,
        input_dim=1,
        f=f,
        g=g,
        q=q,
        R=np.eye(1),
        lower=-np.ones(1),
        upper=np.ones(1),
        A=np.zeros((1, 1)),
        B=np.zeros((1, 1)),
        Qhat=2 * np.eye(1),
    )
    return Benchmark(system.name, system, reference_value=value, reference_gradient=gradient,
                     reference_policy=policy, initial_policy=initial, uncontrollable_linearization=True)


# endregion

# region Pendulum ------------------------------------------------------------------------------------------------------

PENDULUM_LENGTH = 0.5
PENDULUM_MASS = 0.1
PENDULUM_GRAVITY = 9.8
PENDULUM_FRICTION = 0.1


def make_pendulum():
    """ theta'' = (m g l sin(theta) - mu theta' + u) / (m l^2), state (theta, theta'), Q = x^T x, R = 2. """
    inertia = PENDULUM_MASS * PENDULUM_LENGTH ** 2
    stiffness = PENDULUM_MASS * PENDULUM_GRAVITY * PENDULUM_LENGTH / inertia
    damping = PENDULUM_FRICTION / inertia
    gain = 1 / inertia

    def f(x, xp):
        return xp.stack([x[..., 1], stiffness * xp.sin(x[..., 0]) - damping * x[..., 1]], axis=-1)

    def q(x, xp):
        return xp.sum(x ** 2, axis=-1)

    B = np.array([[0.0], [gain]])
    system = ControlAffineSystem(
        name='pendulum',
        state_dim=2,
        input_dim=1,
        f=f,
        g=_constant_field(B),
        q=q,
        R=np.array([[2.0]]),
        lower=np.array([-2.0, -2.0]),
        upper=np.array([2.0, 2.0]),
        A=np.array([[0.0, 1.0], [stiffness, -damping]]),
        B=B,
        Qhat=2 * np.eye(2),
        g_const=B,
    )
    return Benchmark(system.name, system)


# endregion

# region Lorenz --------------------------------------------------------------------------------------------------------

LORENZ_X3_WEIGHT = 10.0


def make_lorenz():
    """
    x1' = -10 x1 + 10 x2 + u, x2' = 28 x1 - x2 - x1 x2, x3' = -8/3 x2 + x1 x2 with R = 1 on [-2, 2]^3 and
    Q = x1^2 + x2^2 + LORENZ_X3_WEIGHT x3^2.

    x3 is only reached through x2, so with an unweighted cost the linearized optimal loop has a pole near -0.28 and
    trajectories need far longer than the simulation horizon to settle. The linearization is controllable.
    """
    weights = np.array([1.0, 1.0, LORENZ_X3_WEIGHT])

    def f(x, xp):
        x1, x2 = x[..., 0], x[..., 1]
        return xp.stack([
            -10 * x1 + 10 * x2,
            28 * x1 - x2 - x1 * x2,
            -8 / 3 * x2 + x1 * x2,
        ], axis=-1)

    def q(x, xp):
        return xp.sum(weights * x ** 2, axis=-1)

    B = np.array([[1.0], [0.0], [0.0]])
    system = ControlAffineSystem(
        name='lorenz',
        state_dim=3,
        input_dim=1,
        f=f,
        g=_constant_field(B),
        q=q,
        R=np.eye(1),
        lower=-2 * np.ones(3),
        upper=2 * np.ones(3),
        A=np.array([[-10.0, 10.0, 0.0], [28.0, -1.0, 0.0], [0.0, -8 / 3, 0.0]]),
        B=B,
        Qhat=2 * np.diag(weights),
        g_const=B,
    )
    return Benchmark(system.name, system, horizon=config.SIM_HORIZON_LORENZ)


# endregion

def make_benchmark(name):
    """
    Resolves a benchmark by name: "synthetic:<n>", "bilinear", "pendulum" or "lorenz".
    """
    key, _, arg = str(name).partition(':')
    if key == 'synthetic':
        try:
            n = int(arg) if arg else 1
        except ValueError:
            raise ValueError(f'Invalid dimension in benchmark name "{name}".')
        return make_synthetic(n)
    if arg:
        raise ValueError(f'Benchmark "{key}" takes no argument, got "{name}".')
    builders = {
        'bilinear': make_bilinear,
        'pendulum': make_pendulum,
        'lorenz': make_lorenz,
    }
    if key not in builders:
        raise ValueError(f'Unknown benchmark "{name}".')
    return builders[key]()
