import argparse
import logging
import os
import sys
from datetime import datetime

import config
from pipeline import (ConfigError, EXIT_CODES, cmd_export_smt, cmd_simulate, cmd_solve, cmd_table, cmd_verify,
                      dump_defaults, load_config, load_table, output_dir)

EXIT_CONFIG_ERROR = 3


class ArgumentParser(argparse.ArgumentParser):
    """ Usage errors exit with the configuration error status. """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f'{self.prog}: error: {message}\n')


# region Commands
def solve(args):
    run = load_config(args.config, args.seed)
    _, summary = cmd_solve(run, output_dir(args.out, run))
    logging.info(f'Final test error: {summary["final_test_error"]} | Iterations: {summary["iterations"]} | '
                 f'Time: {summary["wall_ms"]:.1f} ms')
    return 0


def verify(args):
    run = load_config(args.config, args.seed)
    report = cmd_verify(args.net, run, output_dir(args.out, run))
    if report.witness is not None:
        logging.info(f'Witness ({report.condition_id}): {report.witness["point"]}')
    return EXIT_CODES[report.outcome]


def simulate(args):
    run = load_config(args.config, args.seed)
    cmd_simulate(args.net, run, output_dir(args.out, run), args.threads)
    return 0


def table(args):
    runs = load_table(args.config, args.seed)
    cmd_table(runs, output_dir(args.out), args.threads, args.simulate)
    return 0


def export_smt(args):
    run = load_config(args.config, args.seed)
    cmd_export_smt(args.net, run, output_dir(args.out, run))
    return 0


def defaults(args):
    print(dump_defaults(), end='')
    return 0


# endregion

def main(argv=None):
    # ARGUMENTS --------------------------------------------------------------------------------------------------------
    parser = ArgumentParser(description='Neural policy iteration')
    subparsers = parser.add_subparsers(title="subcommands", dest="subcommand")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None,
                        help="Path to the YAML run configuration. Missing keys take their default value.")
    common.add_argument("--out", type=str, default=None,
                        help=f"Output directory. Defaults to ${config.OUTPUT_DIR_ENV}, then to the configuration.")
    common.add_argument("--seed", type=int, default=None,
                        help="Overrides the seed of the configuration.")
    common.add_argument("--threads", type=int, default=1,
                        help="Number of worker threads for simulation batches and table rows.")

    # ARGUMENTS: SOLVE -------------------------------------------------------------------------------------------------
    subparsers.add_parser("solve", parents=[common], help="Runs ELM-PI or PINN-PI on a benchmark.")

    # ARGUMENTS: VERIFY ------------------------------------------------------------------------------------------------
    verify_parser = subparsers.add_parser("verify", parents=[common],
                                          help="Verifies the Lyapunov conditions of a saved network. Exit code 0 "
                                               "when verified, 1 on a counterexample, 2 when the box budget runs "
                                               "out.")
    verify_parser.add_argument("--net", type=str, required=True,
                               help="Path to the network file written by solve.")

    # ARGUMENTS: SIMULATE ----------------------------------------------------------------------------------------------
    simulate_parser = subparsers.add_parser("simulate", parents=[common],
                                            help="Simulates closed-loop trajectories from random initial states.")
    simulate_parser.add_argument("--net", type=str, default=None,
                                 help="Path to the network file. Not needed with simulation.controller: initial.")

    # ARGUMENTS: TABLE -------------------------------------------------------------------------------------------------
    table_parser = subparsers.add_parser("table", parents=[common],
                                         help="Solves every row of a table document and aggregates the results.")
    table_parser.add_argument("--simulate", action="store_true",
                              help="Add the mean simulated cost of each row's controller.")

    # ARGUMENTS: EXPORT SMT --------------------------------------------------------------------------------------------
    smt_parser = subparsers.add_parser("export-smt", parents=[common],
                                       help="Writes the negated decrease condition as an SMT-LIB query.")
    smt_parser.add_argument("--net", type=str, required=True,
                            help="Path to the network file written by solve.")

    # ARGUMENTS: DEFAULTS ----------------------------------------------------------------------------------------------
    subparsers.add_parser("defaults", help="Prints the default configuration document.")

    args = parser.parse_args(argv)

    # LOGGING ----------------------------------------------------------------------------------------------------------

    if not os.path.isdir(config.LOG_DIR):
        os.makedirs(config.LOG_DIR)
    logging.basicConfig(
        level=logging.INFO,
        filename=os.path.join(config.LOG_DIR, f'{datetime.now():%Y%m%d}.log'),
        format='[%(asctime)s][%(levelname)s] %(message)s',
        datefmt='%H:%M:%S'
    )

    if args.subcommand != "defaults":
        logging.getLogger().addHandler(logging.StreamHandler(sys.stdout))

    # EXECUTE ----------------------------------------------------------------------------------------------------------
    commands = {
        "solve": solve,
        "verify": verify,
        "simulate": simulate,
        "table": table,
        "export-smt": export_smt,
        "defaults": defaults,
    }
    if args.subcommand not in commands:
        parser.print_help()
        return EXIT_CONFIG_ERROR
    try:
        return commands[args.subcommand](args)
    except ConfigError as e:
        logging.error(f'Invalid configuration: {e}')
        return EXIT_CONFIG_ERROR
    except Exception as e:
        logging.error(f'Something went wrong: {e}')
        raise e


if __name__ == '__main__':
    sys.exit(main())
