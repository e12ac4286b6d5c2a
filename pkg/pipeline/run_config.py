"""
Run configuration documents.

A run is one YAML mapping; every key missing from it takes its value from DEFAULTS (built from `config`). A table
document carries a `rows:` list whose entries are merged over its other top-level keys.
"""
import copy
import os
from dataclasses import dataclass
from typing import Optional

import yaml

import config
from policy_iteration import ElmConfig, TrainConfig
from systems import make_benchmark
from verification import VerificationSpec

DEFAULTS = {
    'benchmark': 'synthetic:1',
    'algorithm': 'elm',
    'width': 50,
    'seed': 0,
    'iterations': config.PI_ITERATIONS,
    'points': None,
    'elm': {
        'activation': config.ACTIVATION,
        'zero_bias': False,
        'bias_mode': config.ELM_BIAS_MODE,
        'lambda': config.ELM_LAMBDA,
        'ridge': config.ELM_RIDGE,
        'lambda_origin': config.ELM_LAMBDA_ORIGIN,
        'tol': config.ELM_TOL,
        'resample': False,
        'rcond': config.ELM_RCOND,
        'sampler': config.ELM_SAMPLER,
    },
    'pinn': {
        'steps_per_iter': config.STEPS_PER_ITER,
        'learning_rate': config.LEARNING_RATE,
        'beta1': config.ADAM_BETA1,
        'beta2': config.ADAM_BETA2,
        'eps': config.ADAM_EPS,
        'lambda_origin': config.LAMBDA_ORIGIN,
        'lambda_gain': None,  # LAMBDA_GAIN, or 0 when the linearization is uncontrollable
        'batch': None,
        'log_every': config.LOG_EVERY,
    },
    'verification': {
        'mode': 'decrease_only',
        'mu': config.VERIFY_MU,
        'epsilon': config.VERIFY_EPSILON,
        'c1': config.VERIFY_C1,
        'c2': config.VERIFY_C2,
        'delta': config.VERIFY_DELTA,
        'max_boxes': None,
    },
    'simulation': {
        'count': 10,
        'low': None,  # domain box when absent
        'high': None,
        'T': None,  # benchmark horizon when absent
        'h': config.SIM_STEP,
        'tol': config.SIM_TOL,
        'controller': 'net',
    },
    'out': None,
}
ALGORITHMS = ('elm', 'pinn')
CONTROLLERS = ('net', 'initial')


class ConfigError(ValueError):
    def __init__(self, field, message):
        super(ConfigError, self).__init__(f'{field}: {message}')
        self.field = field


# region Documents -----------------------------------------------------------------------------------------------------

def merge(base, override, path=''):
    """ Deep merge of `override` over `base`; keys unknown to `base` are rejected. """
    if not isinstance(override, dict):
        raise ConfigError(path or 'document', 'must be a mapping')
    result = copy.deepcopy(base)
    for key, value in override.items():
        field = f'{path}.{key}' if path else str(key)
        if key not in base:
            raise ConfigError(field, 'unknown key')
        if isinstance(base[key], dict):
            if value is None:
                continue
            result[key] = merge(base[key], value, field)
        else:
            result[key] = value
    return result


def read_document(path):
    try:
        with open(path) as file:
            document = yaml.safe_load(file)
    except OSError as e:
        raise ConfigError('config', f'cannot read {path}: {e}')
    except yaml.YAMLError as e:
        raise ConfigError('config', f'{path} is not valid YAML: {e}')
    return {} if document is None else document


def dump_defaults():
    return yaml.safe_dump(DEFAULTS, sort_keys=False)


# endregion

# region Validation ----------------------------------------------------------------------------------------------------

def _number(document, field, positive=False, non_negative=False, integer=False, optional=False):
    *parents, last = field.split('.')
    section = document
    for key in parents:
        section = section[key]
    value = section[last]
    if value is None and optional:
        return None
    if isinstance(value, str) and not integer:
        # YAML 1.1 reads exponents without a dot, like 1e-9, as strings
        try:
            value = section[last] = float(value)
        except ValueError:
            pass
    kind = int if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(field, f'must be {"an integer" if integer else "a number"}, got {value!r}')
    if positive and value <= 0:
        raise ConfigError(field, 'must be positive')
    if non_negative and value < 0:
        raise ConfigError(field, 'must be non-negative')
    return value


def _choice(document, field, choices):
    value = document
    for key in field.split('.'):
        value = value[key]
    if value not in choices:
        raise ConfigError(field, f'must be one of {list(choices)}, got {value!r}')
    return value


def _flag(document, field):
    value = document
    for key in field.split('.'):
        value = value[key]
    if not isinstance(value, bool):
        raise ConfigError(field, f'must be true or false, got {value!r}')
    return value


@dataclass(frozen=True)
class SimulationBatch:
    count: int
    low: Optional[list]
    high: Optional[list]
    T: Optional[float]
    h: float
    tol: float
    controller: str


@dataclass(frozen=True, eq=False)
class RunConfig:
    document: dict

    def __getitem__(self, key):
        return self.document[key]

    @property
    def benchmark_name(self):
        return self.document['benchmark']

    @property
    def algorithm(self):
        return self.document['algorithm']

    @property
    def width(self):
        return self.document['width']

    @property
    def seed(self):
        return self.document['seed']

    def benchmark(self):
        try:
            return make_benchmark(self.document['benchmark'])
        except ValueError as e:
            raise ConfigError('benchmark', str(e))

    def elm_config(self):
        elm = self.document['elm']
        try:
            return ElmConfig(width=self.width, seed=self.seed, activation=elm['activation'],
                             zero_bias=elm['zero_bias'], bias_mode=elm['bias_mode'], lam=elm['lambda'],
                             ridge=elm['ridge'], lambda_origin=elm['lambda_origin'], tol=elm['tol'],
                             max_iters=self.document['iterations'], resample=elm['resample'], rcond=elm['rcond'],
                             sampler=elm['sampler'], points=self.document['points'])
        except ValueError as e:
            raise ConfigError('elm', str(e))

    def train_config(self, benchmark):
        pinn = self.document['pinn']
        lambda_gain = pinn['lambda_gain']
        if lambda_gain is None:
            lambda_gain = 0.0 if benchmark.uncontrollable_linearization else config.LAMBDA_GAIN
        try:
            return TrainConfig(width=self.width, seed=self.seed, steps_per_iter=pinn['steps_per_iter'],
                               learning_rate=pinn['learning_rate'], beta1=pinn['beta1'], beta2=pinn['beta2'],
                               eps=pinn['eps'], lambda_origin=pinn['lambda_origin'], lambda_gain=lambda_gain,
                               batch=pinn['batch'], log_every=pinn['log_every'],
                               max_iters=self.document['iterations'], sampler=self.document['elm']['sampler'],
                               points=self.document['points'])
        except ValueError as e:
            raise ConfigError('pinn', str(e))

    def verification_spec(self):
        v = self.document['verification']
        try:
            return VerificationSpec(mu=v['mu'], epsilon=v['epsilon'], c1=v['c1'], c2=v['c2'], delta=v['delta'],
                                    max_boxes=v['max_boxes'], mode=v['mode'])
        except ValueError as e:
            raise ConfigError('verification', str(e))

    def simulation_batch(self):
        s = self.document['simulation']
        return SimulationBatch(count=s['count'], low=s['low'], high=s['high'], T=s['T'], h=s['h'], tol=s['tol'],
                               controller=s['controller'])


def validate(document):
    """ Checks types and ranges of a fully merged document and returns it as a RunConfig. """
    if not isinstance(document['benchmark'], str):
        raise ConfigError('benchmark', 'must be a string')
    _choice(document, 'algorithm', ALGORITHMS)
    _number(document, 'width', positive=True, integer=True)
    _number(document, 'seed', non_negative=True, integer=True)
    _number(document, 'iterations', positive=True, integer=True)
    _number(document, 'points', positive=True, integer=True, optional=True)

    _choice(document, 'elm.activation', ('tanh', 'relu'))
    _flag(document, 'elm.zero_bias')
    _choice(document, 'elm.bias_mode', ('subtract', 'penalty'))
    _number(document, 'elm.lambda', non_negative=True)
    _number(document, 'elm.ridge', non_negative=True)
    _number(document, 'elm.lambda_origin', non_negative=True)
    _number(document, 'elm.tol', positive=True)
    _flag(document, 'elm.resample')
    _number(document, 'elm.rcond', positive=True)
    _choice(document, 'elm.sampler', ('uniform', 'grid'))

    _number(document, 'pinn.steps_per_iter', positive=True, integer=True)
    _number(document, 'pinn.learning_rate', positive=True)
    _number(document, 'pinn.beta1', non_negative=True)
    _number(document, 'pinn.beta2', non_negative=True)
    _number(document, 'pinn.eps', positive=True)
    _number(document, 'pinn.lambda_origin', non_negative=True)
    _number(document, 'pinn.lambda_gain', non_negative=True, optional=True)
    _number(document, 'pinn.batch', positive=True, integer=True, optional=True)
    _number(document, 'pinn.log_every', positive=True, integer=True)

    _choice(document, 'verification.mode', ('decrease_only', 'full_roa'))
    for key in ('mu', 'c1', 'c2', 'delta'):
        _number(document, f'verification.{key}', positive=True)
    _number(document, 'verification.epsilon', non_negative=True)
    _number(document, 'verification.max_boxes', positive=True, integer=True, optional=True)
    if document['verification']['c1'] >= document['verification']['c2']:
        raise ConfigError('verification.c2', 'must be greater than c1')

    _number(document, 'simulation.count', non_negative=True, integer=True)
    _number(document, 'simulation.T', positive=True, optional=True)
    _number(document, 'simulation.h', positive=True)
    _number(document, 'simulation.tol', positive=True)
    _choice(document, 'simulation.controller', CONTROLLERS)
    for key in ('low', 'high'):
        value = document['simulation'][key]
        if value is not None and not (isinstance(value, list) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
            raise ConfigError(f'simulation.{key}', 'must be a list of numbers')

    if document['out'] is not None and not isinstance(document['out'], str):
        raise ConfigError('out', 'must be a path')

    run = RunConfig(document)
    run.benchmark()
    return run


# endregion

def load_config(source=None, seed=None):
    """
    Builds a validated RunConfig from a YAML path, a mapping or nothing (all defaults).

    :param seed: Overrides the seed of the document.
    """
    document = read_document(source) if isinstance(source, str) else (source or {})
    if 'rows' in document:
        raise ConfigError('rows', 'table documents are only accepted by the table command')
    merged = merge(DEFAULTS, document)
    if seed is not None:
        merged['seed'] = seed
    return validate(merged)


def load_table(source, seed=None):
    """ One RunConfig per row of a table document. """
    document = read_document(source) if isinstance(source, str) else copy.deepcopy(source)
    if not isinstance(document, dict):
        raise ConfigError('document', 'must be a mapping')
    rows = document.pop('rows', [])
    if rows is None:
        rows = []
    if not isinstance(rows, list):
        raise ConfigError('rows', 'must be a list')
    base = merge(DEFAULTS, document)
    configs = []
    for i, row in enumerate(rows):
        merged = merge(base, row, f'rows[{i}]')
        if seed is not None:
            merged['seed'] = seed
        try:
            configs.append(validate(merged))
        except ConfigError as e:
            raise ConfigError(f'rows[{i}].{e.field}', str(e).split(': ', 1)[1])
    return configs


def output_dir(cli_out, run: Optional[RunConfig] = None):
    """ --out, then NPI_OUT_DIR, then the document's `out`, then OUTPUT_DIR. """
    if cli_out:
        return cli_out
    if os.environ.get(config.OUTPUT_DIR_ENV):
        return os.environ[config.OUTPUT_DIR_ENV]
    if run is not None and run['out']:
        return run['out']
    return config.OUTPUT_DIR
