"""Configuration, experiment drivers, CSV output and the command-line front end."""

from postmarkov.experiments.config import ExperimentConfig, load_config, parse_config, serialize_config
from postmarkov.experiments.runs import (
    FidelityTrajectory,
    SolverComparison,
    run_cp_scan,
    run_simulate,
    run_solver_compare,
    run_thermalization,
)

__all__ = [
    "ExperimentConfig",
    "FidelityTrajectory",
    "SolverComparison",
    "load_config",
    "parse_config",
    "serialize_config",
    "run_cp_scan",
    "run_simulate",
    "run_solver_compare",
    "run_thermalization",
]
