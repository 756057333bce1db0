"""Sliding windows over a normalised meter series.

Window ``i`` covers steps [i * stride, i * stride + seq_len). Its input is the
retained appliance channels over the window, its target the grid total at
the last step, and ``y_window`` the grid total over the whole window (what
the discriminator compares the prediction against).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from grid_shield.data.series import MeterSeries
from grid_shield.data.stats import NormStats
from grid_shield.errors import DataError


@dataclass
class Batch:
    """x [B, S, F], y [B, 1], y_window [B, S, 1], all float32."""

    x: np.ndarray
    y: np.ndarray
    y_window: np.ndarray

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class WindowSet:
    x: np.ndarray  # [N, S, F]
    y: np.ndarray  # [N, 1]
    y_window: np.ndarray  # [N, S, 1]
    end_index: np.ndarray  # [N] series index of each target step
    labels: np.ndarray  # [N] theft flag at the target step

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def seq_len(self) -> int:
        return self.x.shape[1]

    def take(self, indices: np.ndarray) -> "WindowSet":
        indices = np.asarray(indices, dtype=np.int64)
        return WindowSet(
            x=self.x[indices],
            y=self.y[indices],
            y_window=self.y_window[indices],
            end_index=self.end_index[indices],
            labels=self.labels[indices],
        )

    def as_batch(self) -> Batch:
        return Batch(x=self.x, y=self.y, y_window=self.y_window)

    def batches(
        self, batch_size: int, shuffle: bool = False, seed: Optional[int] = None
    ) -> Iterator[Batch]:
        if batch_size < 1:
            raise DataError("batch_size must be >= 1")
        order = np.arange(len(self))
        if shuffle:
            np.random.default_rng(seed).shuffle(order)
        for begin in range(0, len(order), batch_size):
            idx = order[begin:begin + batch_size]
            yield Batch(x=self.x[idx], y=self.y[idx], y_window=self.y_window[idx])


def window_count(length: int, seq_len: int, stride: int) -> int:
    if seq_len > length:
        return 0
    return (length - seq_len) // stride + 1


def windowize(series: MeterSeries, seq_len: int, stride: int, norm: NormStats) -> WindowSet:
    if seq_len < 1 or stride < 1:
        raise DataError("seq_len and stride must be >= 1")
    if seq_len > len(series):
        raise DataError(f"seq_len {seq_len} exceeds series length {len(series)}")

    features = norm.normalize_channels(norm.select(series))
    grid = norm.normalize_grid(series.grid)
    count = window_count(len(series), seq_len, stride)
    starts = np.arange(count) * stride
    steps = starts[:, None] + np.arange(seq_len)[None, :]
    end_index = starts + seq_len - 1

    assert series.labels is not None
    return WindowSet(
        x=features[steps].astype(np.float32),
        y=grid[end_index][:, None].astype(np.float32),
        y_window=grid[steps][:, :, None].astype(np.float32),
        end_index=end_index,
        labels=series.labels[end_index].copy(),
    )
