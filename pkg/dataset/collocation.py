"""
Collocation and test points on the domain box of a system.

All randomness in the package goes through `generator`, a counter-based Philox stream keyed by (seed, purpose, index).
Two draws with the same key are identical no matter how many other streams were consumed before, which keeps runs
reproducible when work is spread over threads.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np

import config

STREAMS = {
    'weights': 0,
    'collocation': 1,
    'test': 2,
    'simulation': 3,
    'minibatch': 4,
    'sampling': 5,
}


def generator(seed, stream, index=0):
    """
    Creates the random stream for a purpose.

    :param seed: Non-negative run seed.
    :param stream: One of the names in STREAMS.
    :param index: Counter inside the stream (PI iteration, trajectory number...).
    :return: numpy Generator backed by Philox.
    """
    if seed < 0:
        raise ValueError(f'Seeds must be non-negative, got {seed}.')
    key = np.array([seed, (STREAMS[stream] << 32) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class CollocationSet:
    points: np.ndarray
    seed: int
    sampler: str

    def __len__(self):
        return self.points.shape[0]


def _cell_centers(lower, upper, k):
    centers = [lower[i] + (np.arange(k) + 0.5) / k * (upper[i] - lower[i]) for i in range(lower.shape[0])]
    points = np.array(list(itertools.product(*centers)), dtype=np.float64)
    return points[np.any(points != 0, axis=-1)]


def sample_collocation(system, count, seed, sampler=config.ELM_SAMPLER, index=0):
    """
    Draws collocation points strictly inside the domain and away from the origin.

    :param system: ControlAffineSystem providing the box.
    :param count: Number of points N. The grid sampler uses the smallest per-axis resolution giving at least N points
                  once the origin is left out, so it may return more than N.
    :param seed: Run seed.
    :param sampler: "uniform" or "grid".
    :param index: Stream counter, used to draw fresh points at each PI iteration.
    :return: CollocationSet.
    """
    if count < 1:
        raise ValueError(f'At least one collocation point is needed, got {count}.')
    lower, upper = system.lower, system.upper
    n = system.state_dim

    if sampler == 'uniform':
        rng = generator(seed, 'collocation', index)
        points = np.empty((0, n))
        while points.shape[0] < count:
            draw = rng.uniform(lower, upper, size=(count - points.shape[0], n))
            keep = np.all((draw > lower) & (draw < upper), axis=-1) & np.any(draw != 0, axis=-1)
            points = np.concatenate([points, draw[keep]])
    elif sampler == 'grid':
        k = max(int(np.ceil(count ** (1 / n) - 1e-9)), 1)
        points = _cell_centers(lower, upper, k)
        while points.shape[0] < count:
            k += 1
            points = _cell_centers(lower, upper, k)
    else:
        raise ValueError(f'Unknown collocation sampler "{sampler}".')

    logging.debug(f'Sampled {points.shape[0]} collocation points ({sampler}, seed {seed}, index {index}).')
    return CollocationSet(points=points, seed=seed, sampler=sampler)


def evaluation_points(system, count, seed):
    """
    Points on which value functions are compared: a 21^n grid covering the closed box when n <= 3, otherwise 2N
    uniform points.
    """
    n = system.state_dim
    if n <= config.TEST_GRID_MAX_DIM:
        axes = [np.linspace(system.lower[i], system.upper[i], config.TEST_GRID_SIZE) for i in range(n)]
        return np.array(list(itertools.product(*axes)), dtype=np.float64)
    rng = generator(seed, 'test')
    return rng.uniform(system.lower, system.upper, size=(2 * count, n))
