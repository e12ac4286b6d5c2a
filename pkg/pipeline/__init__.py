from .run_config import DEFAULTS, ConfigError, RunConfig, SimulationBatch, load_config, load_table, output_dir, \
    dump_defaults
from .commands import EXIT_CODES, TABLE_COLUMNS, cmd_solve, cmd_verify, cmd_simulate, cmd_table, cmd_export_smt
