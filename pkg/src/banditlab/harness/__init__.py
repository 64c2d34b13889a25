"""Experiment harness: configs, seeded parallel runs, summaries and plots."""
from .config import AgentEntry, ExperimentConfig, Sweep, eval_formula
from .plots import Series, emit_plot
from .runner import (
    RunResult,
    SummaryRow,
    cell_seed,
    read_summary,
    read_traces,
    run_experiment,
    subsample,
    sweep,
)

__all__ = [
    "AgentEntry", "ExperimentConfig", "Sweep", "eval_formula", "Series", "emit_plot", "RunResult",
    "SummaryRow", "cell_seed", "read_summary", "read_traces", "run_experiment", "subsample", "sweep",
]
