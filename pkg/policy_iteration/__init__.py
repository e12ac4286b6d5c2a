from .riccati import ResonantSpectrumError, NotHurwitzError, LyapunovProblem, lyapunov_solve, gain_update, \
    is_hurwitz, kleinman, closed_loop_value_matrix
from .history import IterationRecord, PiRun, save_history
from .warm_start import seed_gain, lqr_gain, initial_policy
from .elm import ElmConfig, LeastSquaresProblem, assemble, solve_ls, run_elm_pi
from .pinn import TrainConfig, AdamState, adam_step, target_gain, run_pinn_pi
