"""Benchmark harness: exact cases, perturbed data, presets and reports."""

from .catalog import ExactCase, exact_catalog
from .config import PRESETS, ExperimentConfig, Variant, load_config, preset
from .experiments import run_experiment
from .perturb import MeasuredField, PerturbationSpec, make_unfitted_data, perturb
from .report import emit_report, read_csv

__all__ = [
    "ExactCase",
    "ExperimentConfig",
    "MeasuredField",
    "PRESETS",
    "PerturbationSpec",
    "Variant",
    "emit_report",
    "exact_catalog",
    "load_config",
    "make_unfitted_data",
    "perturb",
    "preset",
    "read_csv",
    "run_experiment",
]
