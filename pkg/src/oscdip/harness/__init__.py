"""Configuration, orchestration and reporting for restoration runs."""

from .config import ConfigError, RunConfig, load_config
from .report import emit_csv, emit_plot, read_csv
from .runner import RunError, RunRecord, accuracy, run
from .synth import synth_curve

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunError",
    "RunRecord",
    "accuracy",
    "emit_csv",
    "emit_plot",
    "load_config",
    "read_csv",
    "run",
    "synth_curve",
]
