"""Meter series and theft episode models."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from grid_shield.errors import DataError

STEP = np.timedelta64(15, "m")


@dataclass(frozen=True)
class TheftEpisode:
    """Reported grid total scaled by (1 - alpha) over [start, start + duration)."""

    alpha: float
    start: int
    duration: int

    @property
    def stop(self) -> int:
        return self.start + self.duration

    def overlaps(self, other: "TheftEpisode") -> bool:
        return self.start < other.stop and other.start < self.stop

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "start": self.start, "duration": self.duration}

    @classmethod
    def from_dict(cls, data: dict) -> "TheftEpisode":
        return cls(
            alpha=float(data["alpha"]),
            start=int(data["start"]),
            duration=int(data["duration"]),
        )


@dataclass
class MeterSeries:
    """Fifteen-minute appliance readings plus the reported grid total (kW)."""

    timestamps: np.ndarray  # datetime64[ns], naive UTC
    channel_names: list[str]
    channels: np.ndarray  # [T, C]
    grid: np.ndarray  # [T]
    labels: Optional[np.ndarray] = None  # [T] bool, True inside a theft episode
    episodes: list[TheftEpisode] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        self.channels = np.asarray(self.channels, dtype=np.float64)
        self.grid = np.asarray(self.grid, dtype=np.float64)
        n = len(self.timestamps)
        if self.labels is None:
            self.labels = np.zeros(n, dtype=bool)
        self.labels = np.asarray(self.labels, dtype=bool)

        if self.channels.ndim != 2 or self.channels.shape != (n, len(self.channel_names)):
            raise DataError(
                f"channels must be [{n}, {len(self.channel_names)}], got {self.channels.shape}"
            )
        if self.grid.shape != (n,) or self.labels.shape != (n,):
            raise DataError("grid and labels must have one value per timestamp")
        if n > 1:
            steps = np.diff(self.timestamps)
            if not np.all(steps == STEP):
                raise DataError("timestamps must advance in fixed 15-minute steps")
        if not (np.isfinite(self.channels).all() and np.isfinite(self.grid).all()):
            raise DataError("meter values must be finite")

    def __len__(self) -> int:
        return len(self.timestamps)

    def channel(self, name: str) -> np.ndarray:
        try:
            return self.channels[:, self.channel_names.index(name)]
        except ValueError as e:
            raise DataError(f"no channel named {name!r}", cause=e) from e

    def copy(self) -> "MeterSeries":
        return MeterSeries(
            timestamps=self.timestamps.copy(),
            channel_names=list(self.channel_names),
            channels=self.channels.copy(),
            grid=self.grid.copy(),
            labels=self.labels.copy() if self.labels is not None else None,
            episodes=list(self.episodes),
            meta=dict(self.meta),
        )

    def slice(self, start: int, stop: int) -> "MeterSeries":
        """Sub-series [start, stop); episodes are clipped and re-based."""
        episodes = []
        for ep in self.episodes:
            lo, hi = max(ep.start, start), min(ep.stop, stop)
            if lo < hi:
                episodes.append(TheftEpisode(ep.alpha, lo - start, hi - lo))
        assert self.labels is not None
        return MeterSeries(
            timestamps=self.timestamps[start:stop],
            channel_names=list(self.channel_names),
            channels=self.channels[start:stop],
            grid=self.grid[start:stop],
            labels=self.labels[start:stop],
            episodes=episodes,
            meta=dict(self.meta),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.channels, columns=self.channel_names)
        frame.insert(0, "localminute", pd.to_datetime(self.timestamps))
        frame["grid"] = self.grid
        return frame

    def fingerprint(self) -> str:
        """SHA-256 over timestamps and values, used by split audits and run manifests."""
        digest = hashlib.sha256()
        digest.update(self.timestamps.astype("int64").tobytes())
        digest.update(",".join(self.channel_names).encode("utf-8"))
        digest.update(np.ascontiguousarray(self.channels).tobytes())
        digest.update(np.ascontiguousarray(self.grid).tobytes())
        return digest.hexdigest()
