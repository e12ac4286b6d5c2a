from .systems import ControlAffineSystem, LinearizationMismatchError, linearize
from .benchmarks import Benchmark, make_synthetic, make_bilinear, make_pendulum, make_lorenz, make_benchmark
