"""
Branch-and-bound verification of Lyapunov conditions for the closed loop of a value network.

With the improved policy kappa = -1/2 R^-1 g^T DV^T and R = L L^T, the derivative of V along the closed loop is

    dV/dt = DV f - 1/2 || L^-1 g^T DV^T ||^2

which is evaluated as a single interval expression over each box. Conditions:

    decrease              dV/dt <= -mu on the domain minus the open infinity-norm ball U_eps
    level_set_decrease    dV/dt <= -mu where c1 <= V <= c2
    boundary_exclusion    V > c2 on the boundary of the domain
    inner_level_set       V > c1 on the domain minus U_eps

A counterexample is only reported from a point evaluation at a box midpoint that violates the condition by more than
delta, so overestimation of the enclosures never produces a false counterexample.
"""
import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import numpy as np
import yaml

import config
from dataset import generator
from network import Activation, FeedbackPolicy, ValueNet
from . import interval
from .interval import Interval

MODES = ('decrease_only', 'full_roa')
OUTCOMES = ('verified', 'counterexample', 'budget_exhausted')
MIN_SPLIT_WIDTH = 1e-12


@dataclass(frozen=True)
class VerificationSpec:
    mu: float = config.VERIFY_MU
    epsilon: float = config.VERIFY_EPSILON
    c1: float = config.VERIFY_C1
    c2: float = config.VERIFY_C2
    delta: float = config.VERIFY_DELTA
    max_boxes: Optional[int] = None  # defaults by state dimension
    mode: str = 'decrease_only'

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f'mode must be one of {MODES}, got "{self.mode}".')
        if self.mu <= 0:
            raise ValueError(f'mu must be positive, got {self.mu}.')
        if self.epsilon < 0:
            raise ValueError(f'epsilon must be non-negative, got {self.epsilon}.')
        if self.delta <= 0:
            raise ValueError(f'delta must be positive, got {self.delta}.')
        if not 0 < self.c1 < self.c2:
            raise ValueError(f'Level sets must satisfy 0 < c1 < c2, got c1={self.c1} c2={self.c2}.')
        if self.max_boxes is not None and self.max_boxes < 1:
            raise ValueError(f'max_boxes must be positive, got {self.max_boxes}.')

    def budget(self, state_dim):
        if self.max_boxes is not None:
            return self.max_boxes
        return config.MAX_BOXES_2D if state_dim <= 2 else config.MAX_BOXES_3D


@dataclass
class VerificationReport:
    outcome: str
    condition_id: Optional[str] = None
    witness: Optional[dict] = None
    boxes_processed: int = 0
    wall_ms: float = 0.0
    mean_width: Optional[float] = None

    def as_dict(self):
        return {
            'outcome': self.outcome,
            'condition_id': self.condition_id,
            'witness': self.witness,
            'boxes_processed': int(self.boxes_processed),
            'wall_ms': float(self.wall_ms),
            'mean_width': None if self.mean_width is None else float(self.mean_width),
        }


def save_report(report: VerificationReport, path):
    with open(path, 'w') as file:
        yaml.safe_dump(report.as_dict(), file, sort_keys=False)
    logging.info(f'Verification report saved: {path}')


# region Evaluation ----------------------------------------------------------------------------------------------------

def _as_box(box):
    if not isinstance(box, Interval):
        lo, hi = box
        box = Interval(lo, hi)
    return box if box.ndim == 2 else box.reshape(1, -1)


def _tanh_enclosures(net, box):
    """
    Value and gradient of a tanh network over boxes [B, n]. The direct enclosures are intersected with mean-value
    forms around the box centers, the gradient through an enclosure of the Hessian and the value through the gradient.
    Output weights of opposite signs then cancel up to a term quadratic in the box width.
    """
    n = net.state_dim
    weighted = net.beta[:, None] * net.W
    z = box @ net.W.T + net.b
    t, s = interval.tanh(z), interval.sech2(z)
    value = t @ net.beta - net.bias_shift
    dv = s @ weighted

    center = Interval(box.mid)
    offset = box - center
    z_center = center @ net.W.T + net.b
    value_center = interval.tanh(z_center) @ net.beta - net.bias_shift
    dv_center = interval.sech2(z_center) @ weighted

    outer = (net.W[:, :, None] * net.W[:, None, :]).reshape(net.width, n * n)
    hessian = (-2 * (t * s) @ (net.beta[:, None] * outer)).reshape(-1, n, n)
    dv = interval.intersect(dv, dv_center + interval.sum(hessian * offset[:, None, :], axis=-1))
    value = interval.intersect(value, value_center + interval.sum(dv * offset, axis=-1))
    return value, dv


def interval_eval(system, net, box):
    """
    Enclosures of V and of dV/dt over boxes.

    :param box: Interval of shape [B, n] (or [n]), or a (lower, upper) pair.
    :return: (V, dVdot) intervals of shape [B].
    """
    box = _as_box(box)
    if isinstance(net, ValueNet):
        if net.activation is Activation.TANH:
            value, dv = _tanh_enclosures(net, box)
        else:
            z = box @ net.W.T + net.b
            value = interval.relu(z) @ net.beta - net.bias_shift
            dv = interval.heaviside(z) @ (net.beta[:, None] * net.W)
    else:
        value = interval.as_interval(net.value(box, xp=interval))
        dv = interval.broadcast_to(net.gradient(box, xp=interval), box.shape)

    drift_term = interval.sum(dv * system.f(box, interval), axis=-1)
    L_inv_T = np.linalg.inv(system.R_chol).T
    if system.g_const is not None:
        y = dv @ system.g_const
    else:
        y = interval.sum(system.g(box, interval) * dv[..., None], axis=-2)
    control_term = interval.sum((y @ L_inv_T) ** 2, axis=-1)
    return value, drift_term - 0.5 * control_term


def interval_eval_dVdot(system, net, box):
    return interval_eval(system, net, box)[1]


def dvdot_points(system, net, x):
    """ dV/dt = DV(x) (f(x) + g(x) kappa(x)) by direct evaluation at points [..., n]. """
    x = np.asarray(x, dtype=np.float64)
    drift = system.closed_loop(x, FeedbackPolicy(net, system)(x))
    return np.einsum('...i,...i->...', net.gradient(x), drift)


# endregion

# region Conditions ----------------------------------------------------------------------------------------------------

def _inside_ball(lo, hi, epsilon):
    return np.all(np.maximum(np.abs(lo), np.abs(hi)) <= epsilon, axis=-1)


def _outside_ball(x, epsilon):
    return np.max(np.abs(x), axis=-1) > epsilon


class _Condition:
    """
    Decides a batch of boxes. `check` returns (discharged, strong, weak, enclosure): `strong` marks midpoints that
    violate the condition by more than delta, `weak` those violating its delta-weakened form.
    """
    condition_id = None

    def __init__(self, system, net, spec):
        self.system, self.net, self.spec = system, net, spec
        self.width_sum = 0.0
        self.width_count = 0

    def roots(self):
        return self.system.lower[None, :], self.system.upper[None, :]

    def record(self, enclosure, mask):
        widths = enclosure.width[mask]
        widths = widths[np.isfinite(widths)]
        self.width_sum += float(np.sum(widths))
        self.width_count += widths.size

    @property
    def mean_width(self):
        return self.width_sum / self.width_count if self.width_count else None


class _Decrease(_Condition):
    condition_id = 'decrease'

    def check(self, lo, hi):
        spec = self.spec
        _, dvdot = interval_eval(self.system, self.net, Interval(lo, hi))
        inside = _inside_ball(lo, hi, spec.epsilon)
        discharged = inside | (dvdot.hi <= -spec.mu)
        self.record(dvdot, ~inside)

        mid = (lo + hi) / 2
        outside = _outside_ball(mid, spec.epsilon)
        point = dvdot_points(self.system, self.net, mid)
        strong = ~discharged & outside & (point > -spec.mu + spec.delta)
        weak = ~discharged & outside & (point >= -spec.mu - spec.delta)
        return discharged, strong, weak, {'dvdot': point, 'enclosure': dvdot}


class _LevelSetDecrease(_Condition):
    condition_id = 'level_set_decrease'

    def check(self, lo, hi):
        spec = self.spec
        value, dvdot = interval_eval(self.system, self.net, Interval(lo, hi))
        off_band = (value.hi < spec.c1) | (value.lo > spec.c2)
        discharged = off_band | (dvdot.hi <= -spec.mu)
        self.record(dvdot, ~off_band)

        mid = (lo + hi) / 2
        v = self.net.value(mid)
        point = dvdot_points(self.system, self.net, mid)
        strong = ~discharged & (v >= spec.c1) & (v <= spec.c2) & (point > -spec.mu + spec.delta)
        weak = (~discharged & (v >= spec.c1 - spec.delta) & (v <= spec.c2 + spec.delta)
                & (point >= -spec.mu - spec.delta))
        return discharged, strong, weak, {'value': v, 'dvdot': point, 'enclosure': dvdot}


class _BoundaryExclusion(_Condition):
    condition_id = 'boundary_exclusion'

    def roots(self):
        """ The 2n faces of the domain as degenerate boxes. """
        lower, upper = self.system.lower, self.system.upper
        los, his = [], []
        for axis in range(self.system.state_dim):
            for bound in (lower[axis], upper[axis]):
                lo, hi = lower.copy(), upper.copy()
                lo[axis] = hi[axis] = bound
                los.append(lo)
                his.append(hi)
        return np.array(los), np.array(his)

    def check(self, lo, hi):
        spec = self.spec
        value, _ = interval_eval(self.system, self.net, Interval(lo, hi))
        discharged = value.lo > spec.c2
        self.record(value, np.ones_like(discharged))

        v = self.net.value((lo + hi) / 2)
        strong = ~discharged & (v <= spec.c2 - spec.delta)
        weak = ~discharged & (v <= spec.c2 + spec.delta)
        return discharged, strong, weak, {'value': v, 'enclosure': value}


class _InnerLevelSet(_Condition):
    condition_id = 'inner_level_set'

    def check(self, lo, hi):
        spec = self.spec
        value, _ = interval_eval(self.system, self.net, Interval(lo, hi))
        inside = _inside_ball(lo, hi, spec.epsilon)
        discharged = inside | (value.lo > spec.c1)
        self.record(value, ~inside)

        mid = (lo + hi) / 2
        outside = _outside_ball(mid, spec.epsilon)
        v = self.net.value(mid)
        strong = ~discharged & outside & (v <= spec.c1 - spec.delta)
        weak = ~discharged & outside & (v <= spec.c1 + spec.delta)
        return discharged, strong, weak, {'value': v, 'enclosure': value}


# endregion

# region Branch and bound ----------------------------------------------------------------------------------------------

def _bisect(lo, hi, scale):
    axis = np.argmax((hi - lo) / scale, axis=-1)
    rows = np.arange(lo.shape[0])
    mid = (lo[rows, axis] + hi[rows, axis]) / 2
    left_hi, right_lo = hi.copy(), lo.copy()
    left_hi[rows, axis] = mid
    right_lo[rows, axis] = mid
    return np.concatenate([lo, right_lo]), np.concatenate([left_hi, hi])


def _witness(condition, lo, hi, index, info):
    mid = (lo[index] + hi[index]) / 2
    witness = {
        'point': [float(v) for v in mid],
        'box_lower': [float(v) for v in lo[index]],
        'box_upper': [float(v) for v in hi[index]],
    }
    for key in ('value', 'dvdot'):
        if key in info:
            witness[key] = float(info[key][index])
    enclosure = info['enclosure']
    witness['enclosure'] = [float(enclosure.lo[index]), float(enclosure.hi[index])]
    return witness


def _search(condition, scale, budget, processed, batch):
    """
    Depth-first branch and bound over the roots of a condition.

    :return: (outcome, witness, boxes processed so far)
    """
    worklist = [condition.roots()]
    undecided = 0
    while worklist:
        if processed >= budget:
            return 'budget_exhausted', None, processed
        lo, hi = worklist.pop()
        take = min(batch, budget - processed, lo.shape[0])
        if take < lo.shape[0]:
            worklist.append((lo[:-take], hi[:-take]))
            lo, hi = lo[-take:], hi[-take:]
        processed += take

        discharged, strong, weak, info = condition.check(lo, hi)
        splittable = np.max((hi - lo) / scale, axis=-1) > MIN_SPLIT_WIDTH
        hits = np.flatnonzero(strong | (weak & ~splittable))
        if hits.size:
            return 'counterexample', _witness(condition, lo, hi, hits[0], info), processed

        pending = ~discharged & splittable
        undecided += int(np.count_nonzero(~discharged & ~splittable))
        if np.any(pending):
            worklist.append(_bisect(lo[pending], hi[pending], scale))

    if undecided:
        logging.warning(f'{condition.condition_id}: {undecided} boxes could not be split or decided.')
        return 'budget_exhausted', None, processed
    return 'verified', None, processed


def verify(system, net, spec: VerificationSpec, batch=config.VERIFY_BATCH):
    """
    Verifies the decrease condition, or all region-of-attraction conditions, of the closed loop of `net`.
    """
    start = datetime.now()
    logging.info('===== VERIFICATION =====')
    logging.info(f'{system.name}: mode={spec.mode} mu={spec.mu} epsilon={spec.epsilon} c1={spec.c1} c2={spec.c2} '
                 f'delta={spec.delta}')

    if spec.mode == 'decrease_only':
        conditions = [_Decrease(system, net, spec)]
    else:
        conditions = [_LevelSetDecrease(system, net, spec), _BoundaryExclusion(system, net, spec),
                      _InnerLevelSet(system, net, spec)]

    budget = spec.budget(system.state_dim)
    scale = system.widths
    processed = 0
    report = None
    for condition in conditions:
        outcome, witness, processed = _search(condition, scale, budget, processed, batch)
        logging.debug(f'{condition.condition_id}: mean enclosure width {condition.mean_width} '
                      f'over {condition.width_count} boxes')
        logging.info(f'{condition.condition_id}: {outcome} ({processed} boxes so far)')
        if outcome != 'verified':
            report = VerificationReport(outcome=outcome, condition_id=condition.condition_id, witness=witness,
                                        boxes_processed=processed, mean_width=condition.mean_width)
            break
    if report is None:
        report = VerificationReport(outcome='verified', boxes_processed=processed,
                                    mean_width=conditions[0].mean_width)

    report.wall_ms = (datetime.now() - start).total_seconds() * 1000
    logging.info(f'Verification finished: {report.outcome} after {report.boxes_processed} boxes in '
                 f'{report.wall_ms:.1f} ms.')
    return report


# endregion

def soundness_check(system, net, spec: VerificationSpec, samples=10 ** 4, seed=0):
    """
    Direct evaluation of the verified inequalities at random points. Returns True when no sampled point violates
    them, used to spot-check verified results.
    """
    rng = generator(seed, 'sampling')
    x = rng.uniform(system.lower, system.upper, size=(samples, system.state_dim))
    outside = _outside_ball(x, spec.epsilon)
    dvdot = dvdot_points(system, net, x)
    if spec.mode == 'decrease_only':
        return bool(np.all(dvdot[outside] <= -spec.mu))

    value = net.value(x)
    band = (value >= spec.c1) & (value <= spec.c2)
    ok = np.all(dvdot[band] <= -spec.mu) and np.all(value[outside] > spec.c1)
    faces = x.copy()
    axis = rng.integers(system.state_dim, size=samples)
    side = rng.integers(2, size=samples)
    faces[np.arange(samples), axis] = np.where(side == 1, system.upper[axis], system.lower[axis])
    return bool(ok and np.all(net.value(faces) > spec.c2))
