"""
Configuration settings for the sbdc toolkit.
"""

import os

# Log levels mapped to stdlib logging levels
LOG_LEVELS = {
    "INFO": 20,
    "ERROR": 40,
    "WARNING": 30,
    "CERT": 25,     # certificate outcomes
    "SIM": 22,      # simulation verdicts
    "ATTACK": 21,   # attack construction
    "DEBUG": 10,
}
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_QUEUE_SIZE = 100

# Graph checks
CONNECTIVITY_TOL = 1e-9
FAST_PATH_TOL = 1e-12

# Objective coding
ROUND_TRIP_TOL = 1e-10
BISECTION_TOL = 1e-12
BRACKET_MAX_DOUBLINGS = 80
ASSUMPTION_SAMPLES = 1000
ASSUMPTION_WINDOW = (-10.0, 20.0)
ASSUMPTION_TOL = 1e-9

# Simulation defaults
DEFAULT_DT = 1e-3
STEP_SLACK = 1e-9
MAX_STORED_SAMPLES = 10_000
CONVERGENCE_TOL = 1e-6
ESCAPE_THRESHOLD = 1e6
CONVERGED_FRACTION = 0.05
GROWTH_FRACTION = 0.2

# Output
SIG_DIGITS = 12
OUT_DIR_ENV = "SBDC_OUT_DIR"
DEFAULT_OUT_DIR = "sbdc_out"

# Benchmark: six-agent semi-autonomous network led by agent 1
BENCHMARK_RHO = 0.5
BENCHMARK_GAINS = {"K1": 6.0, "K2": 2.0}
BENCHMARK_EPSILON = 0.1
BENCHMARK_HORIZON = 100.0
BENCHMARK_DT = 1e-2
BENCHMARK_STEPS = 1000
BENCHMARK_X0 = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
BENCHMARK_INPUT = -0.5
BENCHMARK_TOL = 1e-3


def output_root(flag_value=None, scenario_value=None):
    """Resolve the output directory: flag, then env var, then scenario, then default."""
    if flag_value:
        return flag_value
    env_value = os.environ.get(OUT_DIR_ENV)
    if env_value:
        return env_value
    if scenario_value:
        return scenario_value
    return DEFAULT_OUT_DIR
