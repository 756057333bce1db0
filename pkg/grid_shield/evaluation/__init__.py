"""Evaluation package - metrics, the reconstruction attack and seeded experiments."""

from grid_shield.evaluation.metrics import ScoredSet, auc, r2
from grid_shield.evaluation.attack import (
    AttackConfig,
    AttackReport,
    Attacker,
    fit_attacker,
    intercept,
    paired_samples,
    reconstruction_attack,
    wire_tokens,
)
from grid_shield.evaluation.experiments import (
    DEFAULT_LEVELS,
    AucTable,
    DetectorRun,
    balanced_windows,
    experiment_auc,
    fit_baseline,
    train_detector,
)
from grid_shield.evaluation.reports import write_table, write_trace_csv

__all__ = [
    "ScoredSet",
    "auc",
    "r2",
    "AttackConfig",
    "AttackReport",
    "Attacker",
    "fit_attacker",
    "intercept",
    "paired_samples",
    "reconstruction_attack",
    "wire_tokens",
    "DEFAULT_LEVELS",
    "AucTable",
    "DetectorRun",
    "balanced_windows",
    "experiment_auc",
    "fit_baseline",
    "train_detector",
    "write_table",
    "write_trace_csv",
]
