"""
padambench - PADAM (parallel averaged Adam) and baseline optimizers on
stochastic optimization benchmarks.

Usage:
    >>> from padambench import HyperParams, PadamState, padam3_channels, padam_step
    >>> import numpy as np
    >>> state = PadamState.initial(np.zeros(3), padam3_channels(1000))
    >>> state = padam_step(state, np.ones(3), HyperParams(lr=0.01))
    >>> state.best_index
    1

Experiments:
    >>> from padambench import resolve_config, run_experiment
    >>> config = resolve_config({"problem": "quadratic", "optimizer": "padam3", "steps": 2000})
    >>> result = run_experiment(config)
    >>> result.aggregate["final_mean_error"]  # doctest: +SKIP
    0.0005...

Custom problems and optimizers:
    >>> from padambench import register_problem
    >>>
    >>> @register_problem
    ... class MyProblem:
    ...     name = "my_problem"
    ...     ...
"""

__version__ = "0.1.0"

from padambench.errors import (
    ConfigError,
    DegenerateReferenceError,
    InvalidHyperParameterError,
    InvalidRangeError,
    NonFiniteError,
    OutputError,
    PadamBenchError,
    ScheduleDomainError,
    SelectionError,
    ShapeError,
)
from padambench.prng import RngStream, derive_stream, standard_normal, uniform
from padambench.nn import Activation, Batch, MlpSpec, forward, init_params, mse_loss_and_grad
from padambench.optim import (
    AdamState,
    ChannelKind,
    ChannelSpec,
    HyperParams,
    PadamState,
    adam_ema_channels,
    adam_step,
    adamw_step,
    evaluate_and_select,
    final_selection,
    momentum_sgd_step,
    padam10_channels,
    padam3_channels,
    padam_step,
    schedule_delta,
    select_channel,
    sgd_step,
)
from padambench.registry import (
    get_optimizer,
    get_problem,
    optimizer_names,
    problem_names,
    register_optimizer,
    register_problem,
)
from padambench.problems import (
    GaussianDensityProblem,
    HeatDkmProblem,
    PolyRegProblem,
    QuadraticProblem,
    StochasticObjective,
    exact_heat_solution,
    relative_l2_error,
)
from padambench import drivers
from padambench.config import PRESETS, RunConfig, parse_config, resolve_config
from padambench.stream import SeriesRow, read_series, write_aggregate, write_series
from padambench.harness import ErrorSeries, ExperimentResult, run_experiment, run_single

__all__ = [
    # Errors
    "PadamBenchError",
    "ShapeError",
    "InvalidRangeError",
    "InvalidHyperParameterError",
    "ScheduleDomainError",
    "NonFiniteError",
    "SelectionError",
    "DegenerateReferenceError",
    "ConfigError",
    "OutputError",
    # Random streams
    "RngStream",
    "derive_stream",
    "uniform",
    "standard_normal",
    # Networks
    "Activation",
    "Batch",
    "MlpSpec",
    "init_params",
    "forward",
    "mse_loss_and_grad",
    # Optimizers
    "HyperParams",
    "AdamState",
    "PadamState",
    "ChannelKind",
    "ChannelSpec",
    "sgd_step",
    "momentum_sgd_step",
    "adam_step",
    "adamw_step",
    "padam_step",
    "schedule_delta",
    "select_channel",
    "evaluate_and_select",
    "final_selection",
    "padam3_channels",
    "padam10_channels",
    "adam_ema_channels",
    # Registry
    "register_problem",
    "register_optimizer",
    "get_problem",
    "get_optimizer",
    "problem_names",
    "optimizer_names",
    # Problems
    "StochasticObjective",
    "QuadraticProblem",
    "PolyRegProblem",
    "GaussianDensityProblem",
    "HeatDkmProblem",
    "exact_heat_solution",
    "relative_l2_error",
    "drivers",
    # Experiments
    "PRESETS",
    "RunConfig",
    "parse_config",
    "resolve_config",
    "ErrorSeries",
    "ExperimentResult",
    "run_single",
    "run_experiment",
    # Series I/O
    "SeriesRow",
    "write_series",
    "read_series",
    "write_aggregate",
]
