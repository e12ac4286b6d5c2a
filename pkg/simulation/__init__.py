from .simulate import NumericalBlowupError, Trajectory, simulate, converges, initial_states, simulate_batch, \
    save_trajectory
