""" Closed-loop simulation x' = f(x) + g(x) kappa(x) with fixed-step RK4 and trapezoidal cost accumulation. """
import logging
import math
import os
from dataclasses import dataclass
from multiprocessing.pool import ThreadPool

import numpy as np
import pandas as pd

import config
from dataset import generator


class NumericalBlowupError(ArithmeticError):
    def __init__(self, step, trajectory=None):
        super(NumericalBlowupError, self).__init__(f'Non-finite state at step {step}.')
        self.step = step
        self.trajectory = trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray  # [K+1]
    states: np.ndarray  # [K+1, n]
    inputs: np.ndarray  # [K+1, m]
    accumulated_cost: np.ndarray  # [K+1]
    status: str = 'completed'  # completed, diverged or blowup

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def cost(self):
        return float(self.accumulated_cost[-1])

    def to_frame(self):
        n, m = self.states.shape[1], self.inputs.shape[1]
        columns = {'t': self.times}
        columns.update({f'x_{i + 1}': self.states[:, i] for i in range(n)})
        columns.update({f'u_{i + 1}': self.inputs[:, i] for i in range(m)})
        columns['cost'] = self.accumulated_cost
        return pd.DataFrame(columns)


def simulate(system, policy, x0, T=config.SIM_HORIZON, h=config.SIM_STEP):
    """
    Integrates the closed loop from x0 on the grid 0, h, ..., T.

    :return: Trajectory, with status "diverged" and cut short if the infinity norm of the state exceeds SIM_DIVERGENCE.
    :raises NumericalBlowupError: if the state becomes non-finite.
    """
    if h <= 0 or T < h:
        raise ValueError(f'Need h > 0 and T >= h, got h={h} T={T}.')
    steps = int(round(T / h))
    n = system.state_dim

    def field(x):
        u = policy(x)
        return system.closed_loop(x, u)

    x = np.asarray(x0, dtype=np.float64).reshape(n)
    u = np.asarray(policy(x), dtype=np.float64).reshape(system.input_dim)
    running = float(system.running_cost(x, u))
    states, inputs, costs = [x], [u], [0.0]
    status = 'completed'

    for k in range(1, steps + 1):
        k1 = field(x)
        k2 = field(x + h / 2 * k1)
        k3 = field(x + h / 2 * k2)
        k4 = field(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            partial = _trajectory(h, states, inputs, costs, 'blowup')
            raise NumericalBlowupError(k, partial)

        u = np.asarray(policy(x), dtype=np.float64).reshape(system.input_dim)
        step_cost = float(system.running_cost(x, u))
        costs.append(costs[-1] + h / 2 * (running + step_cost))
        running = step_cost
        states.append(x)
        inputs.append(u)

        if np.max(np.abs(x)) > config.SIM_DIVERGENCE:
            status = 'diverged'
            break

    return _trajectory(h, states, inputs, costs, status)


def _trajectory(h, states, inputs, costs, status):
    return Trajectory(times=h * np.arange(len(states)), states=np.array(states), inputs=np.array(inputs),
                      accumulated_cost=np.array(costs), status=status)


def converges(trajectory: Trajectory, tol=config.SIM_TOL):
    """ True iff x(T) and every state of the final 10% of the grid lie in the tol infinity-norm ball. """
    if trajectory.status != 'completed':
        return False
    tail = max(1, math.ceil(0.1 * len(trajectory.times)))
    return bool(np.max(np.abs(trajectory.states[-tail:])) <= tol and np.max(np.abs(trajectory.final_state)) <= tol)


def initial_states(low, high, count, seed):
    """ Uniform initial conditions in the box [low, high] from the "simulation" stream. """
    low, high = np.asarray(low, dtype=np.float64), np.asarray(high, dtype=np.float64)
    return generator(seed, 'simulation').uniform(low, high, size=(count, low.shape[0]))


def simulate_batch(system, policy, x0s, T=config.SIM_HORIZON, h=config.SIM_STEP, threads=1):
    """
    Simulates independent trajectories, in parallel when threads > 1. Blow-ups are logged and returned as truncated
    trajectories with status "blowup".
    """

    def run(x0):
        try:
            return simulate(system, policy, x0, T, h)
        except NumericalBlowupError as e:
            logging.error(f'Simulation from {np.round(x0, 4).tolist()} blew up at step {e.step}.')
            return e.trajectory

    x0s = list(np.asarray(x0s, dtype=np.float64).reshape(-1, system.state_dim))
    if threads > 1 and len(x0s) > 1:
        with ThreadPool(threads) as pool:
            return pool.map(run, x0s)
    return [run(x0) for x0 in x0s]


def save_trajectory(trajectory: Trajectory, path):
    directory = os.path.dirname(path)
    if directory and not os.path.isdir(directory):
        os.makedirs(directory)
    trajectory.to_frame().to_csv(path, index=False)
