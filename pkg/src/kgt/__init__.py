"""Decentralized gradient tracking with local steps (K-GT) and its comparators."""

from .algorithms import (
    VARIANTS,
    AlgorithmState,
    ConfigError,
    DivergenceError,
    HyperParams,
    StateError,
    init_state,
    run,
    step,
    tracking_variable,
)
from .metrics import MetricsRecord
from .problems import NoiseModel, Problem, make_nonconvex, make_problem, make_quadratic
from .theory import RateInputs, all_rates, stepsize_caps, tune_stepsize
from .runner import RunConfig, SweepConfig, execute, execute_sweep, parse_config
from .topology import MixingMatrix, build_complete, build_disconnected, build_ring, from_weights

__version__ = "0.1.0"
