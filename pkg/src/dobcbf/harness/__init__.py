from .config import ExperimentConfig, default_config, load_config
from .runner import (estimation_error_sweep, run_experiment,
                     timing_profile)
from .reports import MetricsReport

__all__ = [
    "ExperimentConfig", "default_config", "load_config",
    "run_experiment", "estimation_error_sweep", "timing_profile",
    "MetricsReport",
]
