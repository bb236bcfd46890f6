"""Experiment orchestration: configuration, round loop, metrics and CLI."""

from .config import ExperimentConfig, dump, dumps, load, loads
from .runner import (
    ExperimentReport,
    RunState,
    TraceReport,
    init_run,
    run_experiment,
    run_round,
    run_seed,
    select_trace,
    sweep,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "RunState",
    "TraceReport",
    "dump",
    "dumps",
    "init_run",
    "load",
    "loads",
    "run_experiment",
    "run_round",
    "run_seed",
    "select_trace",
    "sweep",
]
