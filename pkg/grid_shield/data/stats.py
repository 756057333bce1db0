"""Exploratory statistics, normalisation and the chronological train/test split."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from grid_shield.data.series import MeterSeries
from grid_shield.errors import DataError

logger = logging.getLogger(__name__)

MIN_STD = 1e-12


@dataclass
class CorrelationMatrix:
    """Pearson coefficients between the non-constant columns (grid included)."""

    names: list[str]
    values: np.ndarray

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.names.index(a), self.names.index(b)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=self.names, columns=self.names)


def _columns(series: MeterSeries) -> pd.DataFrame:
    frame = pd.DataFrame(series.channels, columns=series.channel_names)
    frame["grid"] = series.grid
    return frame


def correlation_matrix(series: MeterSeries) -> CorrelationMatrix:
    if len(series) < 2:
        raise DataError("correlation needs at least 2 timesteps")
    frame = _columns(series)
    constant = [c for c in frame.columns if frame[c].std(ddof=0) <= MIN_STD]
    if constant:
        logger.info("Excluding constant columns from correlation: %s", ", ".join(constant))
        frame = frame.drop(columns=constant)

    values = frame.corr(method="pearson").to_numpy()
    values = np.clip(0.5 * (values + values.T), -1.0, 1.0)
    np.fill_diagonal(values, 1.0)
    return CorrelationMatrix(names=list(frame.columns), values=values)


def describe(series: MeterSeries) -> pd.DataFrame:
    """Per-column mean / std / min / max."""
    frame = _columns(series)
    table = pd.DataFrame(
        {
            "mean": frame.mean(),
            "std": frame.std(ddof=0),
            "min": frame.min(),
            "max": frame.max(),
        }
    )
    table.index.name = "column"
    return table


def split_series(series: MeterSeries, train_frac: float = 0.7) -> tuple[MeterSeries, MeterSeries]:
    """Chronological split: the first ``train_frac`` of the steps train, the rest evaluate."""
    if not 0.0 < train_frac < 1.0:
        raise DataError(f"train_frac must be in (0, 1), got {train_frac}")
    cut = int(round(len(series) * train_frac))
    if cut < 1 or cut >= len(series):
        raise DataError(f"series of length {len(series)} too short to split at {train_frac}")
    return series.slice(0, cut), series.slice(cut, len(series))


@dataclass
class NormStats:
    """Channel and grid mean/std, fitted on a training split only."""

    channel_names: list[str]
    mean: np.ndarray
    std: np.ndarray
    grid_mean: float
    grid_std: float
    source_hash: str
    dropped: list[str] = field(default_factory=list)

    @classmethod
    def fit(cls, train: MeterSeries) -> "NormStats":
        mean = train.channels.mean(axis=0)
        std = train.channels.std(axis=0)
        keep = std > MIN_STD
        dropped = [n for n, k in zip(train.channel_names, keep) if not k]
        if dropped:
            logger.warning("Dropping zero-variance channels: %s", ", ".join(dropped))
        if not keep.any():
            raise DataError("every channel is constant on the training split")
        grid_std = float(train.grid.std())
        if grid_std <= MIN_STD:
            raise DataError("grid total is constant on the training split")
        return cls(
            channel_names=[n for n, k in zip(train.channel_names, keep) if k],
            mean=mean[keep],
            std=std[keep],
            grid_mean=float(train.grid.mean()),
            grid_std=grid_std,
            source_hash=train.fingerprint(),
            dropped=dropped,
        )

    @property
    def feature_dim(self) -> int:
        return len(self.channel_names)

    def select(self, series: MeterSeries) -> np.ndarray:
        """Retained channel columns of ``series`` in fitted order."""
        try:
            idx = [series.channel_names.index(n) for n in self.channel_names]
        except ValueError as e:
            raise DataError("series lacks a channel the statistics were fitted on", cause=e) from e
        return series.channels[:, idx]

    def normalize_channels(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def denormalize_channels(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean

    def normalize_grid(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.grid_mean) / self.grid_std

    def denormalize_grid(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.grid_std + self.grid_mean

    def audit(self, train: MeterSeries, evaluation: MeterSeries) -> None:
        """Raise DataError unless these statistics came from ``train`` and not ``evaluation``."""
        if self.source_hash != train.fingerprint():
            raise DataError("normalisation statistics were not fitted on the training split")
        if self.source_hash == evaluation.fingerprint():
            raise DataError("normalisation statistics were fitted on the evaluation split")
        if len(train) and len(evaluation) and evaluation.timestamps[0] <= train.timestamps[-1]:
            raise DataError("evaluation split overlaps the training period")

    def to_dict(self) -> dict:
        return {
            "channel_names": list(self.channel_names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "grid_mean": self.grid_mean,
            "grid_std": self.grid_std,
            "source_hash": self.source_hash,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormStats":
        return cls(
            channel_names=list(data["channel_names"]),
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
            grid_mean=float(data["grid_mean"]),
            grid_std=float(data["grid_std"]),
            source_hash=str(data["source_hash"]),
            dropped=list(data.get("dropped", [])),
        )
