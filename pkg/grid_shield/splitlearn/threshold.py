"""Alarm threshold calibration and score drift monitoring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from grid_shield.errors import ConfigurationError, ContractError

logger = logging.getLogger(__name__)


def calibrate_threshold(scores_clean: np.ndarray, quantile: float) -> float:
    """Linear-interpolated empirical quantile of clean validation scores."""
    scores = np.asarray(scores_clean, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ContractError("cannot calibrate a threshold from no scores")
    if not 0.0 < quantile <= 1.0:
        raise ContractError(f"quantile must be in (0, 1], got {quantile}")
    return float(np.quantile(scores, quantile, method="linear"))


class DriftState(Enum):
    STABLE = "stable"
    RETRAIN = "retrain"


@dataclass
class DriftConfig:
    k: float = 3.0
    w: int = 4

    def __post_init__(self) -> None:
        if self.k <= 0 or self.w < 1:
            raise ConfigurationError("drift k must be > 0 and w >= 1")

    def to_dict(self) -> dict:
        return {"k": self.k, "w": self.w}

    @classmethod
    def from_dict(cls, data: dict) -> "DriftConfig":
        return cls(k=float(data.get("k", 3.0)), w=int(data.get("w", 4)))


@dataclass
class DriftMonitor:
    """Signals retraining once w consecutive windows average above mean + k * std.

    ``std`` is the spread of individual clean calibration scores.
    """

    mean: float
    std: float
    k: float = 3.0
    w: int = 4
    _run: int = field(default=0, repr=False)

    @classmethod
    def from_scores(cls, clean_scores: np.ndarray, config: DriftConfig = DriftConfig()) -> "DriftMonitor":
        scores = np.asarray(clean_scores, dtype=np.float64)
        if scores.size == 0:
            raise ContractError("drift monitor needs calibration scores")
        return cls(mean=float(scores.mean()), std=float(scores.std()), k=config.k, w=config.w)

    @property
    def limit(self) -> float:
        return self.mean + self.k * self.std

    def observe(self, window_scores: np.ndarray) -> DriftState:
        scores = np.asarray(window_scores, dtype=np.float64)
        if scores.size == 0:
            return self.state
        if scores.mean() > self.limit:
            self._run += 1
        else:
            self._run = 0
        state = self.state
        if state is DriftState.RETRAIN:
            logger.warning(
                "Scores above %.4f for %d consecutive windows; retraining advised", self.limit, self._run
            )
        return state

    @property
    def state(self) -> DriftState:
        return DriftState.RETRAIN if self._run >= self.w else DriftState.STABLE

    def reset(self) -> None:
        self._run = 0
