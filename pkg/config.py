LOG_DIR = r'logs'
OUTPUT_DIR = r'results'
OUTPUT_DIR_ENV = 'NPI_OUT_DIR'

# Policy iteration
PI_ITERATIONS = 10
ACTIVATION = 'tanh'
TEST_GRID_SIZE = 21  # points per axis, used for n <= TEST_GRID_MAX_DIM
TEST_GRID_MAX_DIM = 3

# ELM-PI
ELM_TOL = 1e-9
ELM_RCOND = 1e-12
ELM_LAMBDA = 1.0  # only used in penalty mode
ELM_BIAS_MODE = 'subtract'
ELM_RIDGE = 0.0
ELM_LAMBDA_ORIGIN = 100.0  # origin gradient and curvature rows, relative to the mean squared residual
ELM_SAMPLER = 'uniform'
DIVERGENCE_FACTOR = 1e3

# PINN-PI
STEPS_PER_ITER = 10000
LEARNING_RATE = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
LAMBDA_ORIGIN = 1.0
LAMBDA_GAIN = 1.0
LOG_EVERY = 1000

# Finite differences
FD_STEP_LINEARIZE = 1e-4
FD_STEP_POLICY = 1e-5
LINEARIZE_TOL = 1e-6

# Verification
VERIFY_MU = 1e-4
VERIFY_EPSILON = 0.1
VERIFY_C1 = 0.01
VERIFY_C2 = 1.99
VERIFY_DELTA = 1e-6
MAX_BOXES_2D = 10 ** 7
MAX_BOXES_3D = 10 ** 8
VERIFY_BATCH = 4096

# Simulation
SIM_STEP = 0.01
SIM_HORIZON = 10.0
SIM_HORIZON_LORENZ = 20.0
SIM_DIVERGENCE = 1e3
SIM_TOL = 1e-3
