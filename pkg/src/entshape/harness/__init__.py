"""Experiment orchestration, claims reproduction, and the command line."""

from .config import ConfigError, ExperimentConfig, load_config_file
from .experiments import ExperimentResult, run

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "load_config_file", "run"]
