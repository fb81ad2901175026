"""Command-line experiment runner."""

from .main import main
from .runner import EXPERIMENTS, ConfigError, ExperimentConfig, run

__all__ = ["EXPERIMENTS", "ConfigError", "ExperimentConfig", "main", "run"]
