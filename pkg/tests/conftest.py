import numpy as np
import pytest

from systems import ControlAffineSystem


def scalar_system(drift, gain=0.0, name='scalar'):
    """ x' = drift(x, xp) + gain u with Q = x^2, R = 1 on [-1, 1]. """
    G = np.array([[gain]])

    def g(x, xp):
        return xp.broadcast_to(G, x.shape[:-1] + G.shape)

    def q(x, xp):
        return xp.sum(x ** 2, axis=-1)

    return ControlAffineSystem(name=name, state_dim=1, input_dim=1, f=drift, g=g, q=q, R=np.eye(1),
                               lower=-np.ones(1), upper=np.ones(1), g_const=G)


@pytest.fixture
def make_scalar_system():
    return scalar_system


@pytest.fixture
def stable_scalar():
    return scalar_system(lambda x, xp: -x, name='stable')


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
