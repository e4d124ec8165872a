"""Evaluation protocol, experiment runner, artifact emission and the CLI."""

from .emit import emit, read_csv, recompute_summary, write_csv
from .experiment import ArmConfig, ExperimentConfig, run_comparison
from .metrics import (FAILED, ComparisonSummary, EvalRecord, Improvement, LearningCurve,
                      convergence_steps, evaluate, improvement, median_steps, summarize, threshold)
from .training import AgentSpec, Trainer, make_agent, shaping_hook, train

__all__ = [
    "emit", "read_csv", "recompute_summary", "write_csv", "ArmConfig", "ExperimentConfig",
    "run_comparison", "FAILED", "ComparisonSummary", "EvalRecord", "Improvement",
    "LearningCurve", "convergence_steps", "evaluate", "improvement", "median_steps",
    "summarize", "threshold", "AgentSpec", "Trainer", "make_agent", "shaping_hook", "train",
]
