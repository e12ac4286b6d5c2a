"""
Solve, verify, simulate, table and SMT export commands. Each command writes its artifacts to an output directory and
returns the in-memory result.
"""
import logging
import os
from datetime import datetime
from multiprocessing.pool import ThreadPool

import numpy as np
import pandas as pd
import yaml

from network import FeedbackPolicy, load_net, save_net
from policy_iteration import initial_policy, run_elm_pi, run_pinn_pi, save_history
from simulation import converges, initial_states, save_trajectory, simulate_batch
from verification import export_smt_query, save_report, verify
from .run_config import ConfigError, RunConfig

TABLE_COLUMNS = ['n', 'm', 'N', 'algorithm', 'error', 'time_s', 'mean_cost', 'failure']
EXIT_CODES = {
    'verified': 0,
    'counterexample': 1,
    'budget_exhausted': 2,
}


def _ensure_dir(path):
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


def _save_yaml(record, path):
    with open(path, 'w') as file:
        yaml.safe_dump(record, file, sort_keys=False)
    logging.info(f'Summary saved: {path}')


def _load_net(path, system):
    try:
        net = load_net(path)
    except OSError as e:
        raise ConfigError('net', f'cannot read {path}: {e}')
    except ValueError as e:
        raise ConfigError('net', str(e))
    if net.state_dim != system.state_dim:
        raise ConfigError('net', f'{path} has state dimension {net.state_dim}, {system.name} has '
                                 f'{system.state_dim}')
    return net


# region Solve ---------------------------------------------------------------------------------------------------------

def cmd_solve(run: RunConfig, out_dir):
    """
    Runs ELM-PI or PINN-PI and writes history.csv, net.json and summary.yaml (plus steps.csv and per-iteration
    checkpoints for PINN-PI).

    :return: (PiRun, summary record)
    """
    benchmark = run.benchmark()
    system = benchmark.system
    _ensure_dir(out_dir)
    reference = None
    if benchmark.reference_value is not None:
        def reference(x):
            return benchmark.reference_value(x, np)

    policy = initial_policy(benchmark)
    if run.algorithm == 'elm':
        result = run_elm_pi(system, policy, run.elm_config(), reference, benchmark.name)
    else:
        result = run_pinn_pi(system, policy, run.train_config(benchmark), reference, benchmark.name,
                             checkpoint_dir=os.path.join(out_dir, 'checkpoints'))
        result.steps_frame().to_csv(os.path.join(out_dir, 'steps.csv'), index=False)

    save_history(result, os.path.join(out_dir, 'history.csv'))
    if result.net is not None:
        save_net(result.net, os.path.join(out_dir, 'net.json'))
    summary = result.summary()
    summary['n'] = system.state_dim
    _save_yaml(summary, os.path.join(out_dir, 'summary.yaml'))
    return result, summary


# endregion

# region Verify --------------------------------------------------------------------------------------------------------

def cmd_verify(net_path, run: RunConfig, out_dir):
    """ Verifies a saved network and writes report.yaml. """
    system = run.benchmark().system
    net = _load_net(net_path, system)
    report = verify(system, net, run.verification_spec())
    save_report(report, os.path.join(_ensure_dir(out_dir), 'report.yaml'))
    return report


def cmd_export_smt(net_path, run: RunConfig, out_dir):
    system = run.benchmark().system
    net = _load_net(net_path, system)
    spec = run.verification_spec()
    try:
        text = export_smt_query(system, net, spec)
    except ValueError as e:
        raise ConfigError('verification.mode', str(e))
    path = os.path.join(_ensure_dir(out_dir), 'query.smt2')
    with open(path, 'w') as file:
        file.write(text)
    logging.info(f'SMT query saved: {path}')
    return text


# endregion

# region Simulate ------------------------------------------------------------------------------------------------------

def _simulate_controller(benchmark, policy, run: RunConfig, out_dir, threads):
    batch = run.simulation_batch()
    system = benchmark.system
    low = system.lower if batch.low is None else np.asarray(batch.low, dtype=np.float64)
    high = system.upper if batch.high is None else np.asarray(batch.high, dtype=np.float64)
    if low.shape != (system.state_dim,) or high.shape != (system.state_dim,) or np.any(low > high):
        raise ConfigError('simulation.low', f'initial state box must be {system.state_dim}-dimensional with '
                                            f'low <= high')
    T = benchmark.horizon if batch.T is None else batch.T

    summary = {'count': batch.count, 'converged_count': 0, 'diverged_count': 0, 'mean_cost': None}
    if batch.count == 0:
        return summary

    logging.info(f'===== SIMULATION ===== {batch.count} trajectories, T={T}, h={batch.h}, '
                 f'controller={batch.controller}')
    x0s = initial_states(low, high, batch.count, run.seed)
    trajectories = simulate_batch(system, policy, x0s, T, batch.h, threads)

    directory = _ensure_dir(os.path.join(out_dir, 'trajectories'))
    costs = []
    for i, trajectory in enumerate(trajectories):
        save_trajectory(trajectory, os.path.join(directory, f'traj_{i:03d}.csv'))
        if converges(trajectory, batch.tol):
            summary['converged_count'] += 1
            costs.append(trajectory.cost)
        elif trajectory.status != 'completed':
            summary['diverged_count'] += 1
    summary['mean_cost'] = float(np.mean(costs)) if costs else None
    logging.info(f'Converged {summary["converged_count"]}/{batch.count}, mean cost {summary["mean_cost"]}')
    return summary


def cmd_simulate(net_path, run: RunConfig, out_dir, threads=1):
    """
    Simulates the configured batch with the network controller (or the warm-start controller) and writes one CSV per
    trajectory plus simulation.yaml.
    """
    benchmark = run.benchmark()
    if run.simulation_batch().controller == 'initial':
        policy = initial_policy(benchmark)
    else:
        if net_path is None:
            raise ConfigError('net', 'a network file is needed for simulation.controller: net')
        policy = FeedbackPolicy(_load_net(net_path, benchmark.system), benchmark.system)
    _ensure_dir(out_dir)
    summary = _simulate_controller(benchmark, policy, run, out_dir, threads)
    _save_yaml(summary, os.path.join(out_dir, 'simulation.yaml'))
    return summary


# endregion

# region Table ---------------------------------------------------------------------------------------------------------

def _table_row(args):
    index, run, out_dir, simulate_rows = args
    row_dir = os.path.join(out_dir, f'row_{index:03d}')
    row = {'n': None, 'm': run.width, 'N': None, 'algorithm': run.algorithm, 'error': None, 'time_s': None,
           'mean_cost': None, 'failure': None}
    start = datetime.now()
    try:
        benchmark = run.benchmark()
        row['n'] = benchmark.system.state_dim
        result, summary = cmd_solve(run, row_dir)
        row['N'] = summary['N']
        row['error'] = summary['final_test_error']
        if simulate_rows and result.net is not None:
            policy = FeedbackPolicy(result.net, benchmark.system)
            row['mean_cost'] = _simulate_controller(benchmark, policy, run, row_dir, 1)['mean_cost']
    except Exception as e:
        logging.error(f'Row {index} failed: {e}')
        row['failure'] = str(e)
    row['time_s'] = (datetime.now() - start).total_seconds()
    return row


def cmd_table(runs, out_dir, threads=1, simulate_rows=False):
    """
    Solves every row and writes table.csv with columns n, m, N, algorithm, error, time_s, mean_cost and failure.
    Failed rows are kept with their failure message.
    """
    logging.info(f'===== TABLE ===== {len(runs)} rows')
    _ensure_dir(out_dir)
    jobs = [(i, run, out_dir, simulate_rows) for i, run in enumerate(runs)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPool(threads) as pool:
            rows = pool.map(_table_row, jobs)
    else:
        rows = [_table_row(job) for job in jobs]
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    path = os.path.join(out_dir, 'table.csv')
    table.to_csv(path, index=False)
    logging.info(f'Table saved: {path}')
    return table

# endregion
