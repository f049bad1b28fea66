"""Configs, presets, report files and the command line interface."""

from .config import ExperimentConfig, parse_config, serialize
from .presets import PRESETS, preset_config, preset_names, run_preset
from .runner import ExperimentReport, emit_report, run_experiment

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "PRESETS",
    "emit_report",
    "parse_config",
    "preset_config",
    "preset_names",
    "run_experiment",
    "run_preset",
    "serialize",
]
