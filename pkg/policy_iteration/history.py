""" Per-iteration records of a policy iteration run. """
import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

HISTORY_COLUMNS = ['iter', 'residual_rms', 'sup_change', 'test_error', 'max_increase', 'wall_ms', 'rank',
                   'initial_loss', 'final_loss', 'gain_penalty', 'flags']


@dataclass
class IterationRecord:
    iteration: int
    residual_rms: float
    sup_change: float  # max |V_i - V_{i-1}| on the test set, NaN at the first iteration
    test_error: Optional[float]  # max |V_i - V*| when an oracle exists
    max_increase: float  # max (V_i - V_{i-1}) on the test set
    wall_ms: float
    rank: Optional[int] = None  # ELM only
    initial_loss: Optional[float] = None  # PINN only
    final_loss: Optional[float] = None  # PINN only
    gain_penalty: Optional[float] = None  # PINN only
    flags: List[str] = field(default_factory=list)

    def as_row(self):
        return {
            'iter': self.iteration,
            'residual_rms': self.residual_rms,
            'sup_change': self.sup_change,
            'test_error': self.test_error,
            'max_increase': self.max_increase,
            'wall_ms': self.wall_ms,
            'rank': self.rank,
            'initial_loss': self.initial_loss,
            'final_loss': self.final_loss,
            'gain_penalty': self.gain_penalty,
            'flags': ';'.join(self.flags),
        }


@dataclass
class PiRun:
    """
    History of a policy iteration run. `nets[i]` is the value network obtained at iteration i, `net` the last one.
    `status` is "converged", "max_iters" or "diverged".
    """
    algorithm: str
    benchmark: str
    width: int
    points: int
    seed: int
    records: List[IterationRecord] = field(default_factory=list)
    nets: list = field(default_factory=list)
    status: str = 'running'
    steps: List[dict] = field(default_factory=list)  # PINN loss log rows

    @property
    def net(self):
        return self.nets[-1] if self.nets else None

    @property
    def iterations(self):
        return len(self.records)

    @property
    def final_test_error(self):
        return self.records[-1].test_error if self.records else None

    @property
    def wall_ms(self):
        return float(sum(r.wall_ms for r in self.records))

    def append(self, record: IterationRecord, net):
        expected = self.records[-1].iteration + 1 if self.records else 1
        assert record.iteration == expected, f'Iteration {record.iteration} recorded after {expected - 1}.'
        self.records.append(record)
        self.nets.append(net)

    def to_frame(self):
        return pd.DataFrame([r.as_row() for r in self.records], columns=HISTORY_COLUMNS)

    def steps_frame(self):
        return pd.DataFrame(self.steps, columns=['iter', 'step', 'residual_mse', 'origin_penalty', 'gain_penalty',
                                                 'test_error'])

    def summary(self):
        return {
            'benchmark': self.benchmark,
            'algorithm': self.algorithm,
            'n': int(self.net.state_dim) if self.net is not None else None,
            'm': self.width,
            'N': self.points,
            'seed': self.seed,
            'iterations': self.iterations,
            'status': self.status,
            'final_test_error': None if self.final_test_error is None else float(self.final_test_error),
            'wall_ms': self.wall_ms,
        }


def save_history(run: PiRun, path):
    directory = os.path.dirname(path)
    if directory and not os.path.isdir(directory):
        os.makedirs(directory)
    run.to_frame().to_csv(path, index=False)
    logging.info(f'History saved: {path}')


def sup_norm(values):
    values = np.asarray(values, dtype=np.float64)
    return float(np.max(np.abs(values))) if values.size else 0.0
