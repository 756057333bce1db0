"""Detection and reconstruction metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from grid_shield.errors import ContractError


@dataclass
class ScoredSet:
    """Anomaly scores with binary theft labels of the same length."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(self.labels).reshape(-1).astype(bool)
        if self.scores.shape != self.labels.shape:
            raise ContractError(
                f"{self.scores.size} scores but {self.labels.size} labels"
            )
        if not np.isfinite(self.scores).all():
            raise ContractError("scores must be finite")

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return len(self) - self.positives

    @classmethod
    def concat(cls, clean: np.ndarray, theft: np.ndarray) -> "ScoredSet":
        clean = np.asarray(clean, dtype=np.float64).reshape(-1)
        theft = np.asarray(theft, dtype=np.float64).reshape(-1)
        labels = np.concatenate([np.zeros(clean.size, bool), np.ones(theft.size, bool)])
        return cls(np.concatenate([clean, theft]), labels)


def auc(scored: ScoredSet) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    n_pos, n_neg = scored.positives, scored.negatives
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs both clean and theft samples")
    ranks = rankdata(scored.scores, method="average")
    u = ranks[scored.labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SS_res / SS_tot, computed in float64."""
    truth = np.asarray(y_true, dtype=np.float64).reshape(-1)
    pred = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if truth.size == 0 or truth.shape != pred.shape:
        raise ContractError(f"r2 needs equal nonzero lengths, got {truth.size} and {pred.size}")
    ss_tot = float(((truth - truth.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ContractError("r2 is undefined for a constant target")
    ss_res = float(((truth - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot
