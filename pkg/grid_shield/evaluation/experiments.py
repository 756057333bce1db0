"""Seeded end-to-end experiments: train through the protocol, then score.

``train_detector`` runs the whole pipeline on one series (chronological
split, normalization on the training part, split training over a loopback
channel). ``experiment_auc`` then builds, for each theft level, a balanced
evaluation set of clean windows and the same windows with the grid reading
under-reported, and reports one AUC per level.
"""

from __future__ import annotations

import inspect
import logging
from dataclasses import dataclass, field, replace
from typing import Awaitable, Callable, Iterator, Optional, Sequence, Union

import numpy as np
import pandas as pd

from grid_shield.data.series import MeterSeries
from grid_shield.data.stats import NormStats, split_series
from grid_shield.data.theft import inject_theft
from grid_shield.data.windows import WindowSet, windowize
from grid_shield.errors import ContractError
from grid_shield.evaluation.metrics import ScoredSet, auc
from grid_shield.model.autoencoder import AutoencoderBaseline
from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.model.trainer import LossRecord
from grid_shield.protocol.session import ProtocolConfig
from grid_shield.protocol.transport import LoopbackTransport
from grid_shield.splitlearn.engine import score_windows, train_epoch
from grid_shield.splitlearn.parties import ServerEndpoint, SplitClient, local_pair

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.10, 0.20, 0.30)

Scorer = Callable[[WindowSet], Union[np.ndarray, Awaitable[np.ndarray]]]


@dataclass
class DetectorRun:
    client: SplitClient
    endpoint: ServerEndpoint
    transport: LoopbackTransport
    norm: NormStats
    train: MeterSeries
    evaluation: MeterSeries
    model_cfg: ModelConfig
    train_cfg: TrainConfig
    loss_log: list[LossRecord] = field(default_factory=list)

    def windows(self, series: MeterSeries) -> WindowSet:
        return windowize(series, self.train_cfg.seq_len, self.train_cfg.stride, self.norm)

    async def score(self, windows: WindowSet) -> np.ndarray:
        return await score_windows(self.client, self.transport, windows, self.train_cfg.batch_size)


async def train_detector(
    series: MeterSeries,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    protocol_cfg: Optional[ProtocolConfig] = None,
    train_frac: float = 0.7,
) -> DetectorRun:
    train, evaluation = split_series(series, train_frac)
    norm = NormStats.fit(train)
    norm.audit(train, evaluation)
    if norm.feature_dim != model_cfg.feature_dim:
        logger.info("Model input width set to %d retained channels", norm.feature_dim)
        model_cfg = replace(model_cfg, feature_dim=norm.feature_dim)
    client, endpoint, transport = local_pair(model_cfg, train_cfg, protocol_cfg)
    run = DetectorRun(client, endpoint, transport, norm, train, evaluation, model_cfg, train_cfg)
    windows = run.windows(train)
    for epoch in range(train_cfg.epochs):
        run.loss_log.extend(await train_epoch(client, transport, windows, train_cfg, epoch=epoch))
    logger.info("Detector trained: %d steps on %d windows", len(run.loss_log), len(windows))
    return run


def balanced_windows(
    evaluation: MeterSeries, norm: NormStats, seq_len: int, stride: int, alpha: float
) -> tuple[WindowSet, WindowSet]:
    """Clean windows and the same windows with the grid scaled by (1 - alpha)."""
    tampered = inject_theft(evaluation, alpha, 0, len(evaluation))
    return (
        windowize(evaluation, seq_len, stride, norm),
        windowize(tampered, seq_len, stride, norm),
    )


@dataclass
class AucRow:
    level: float
    auc: float
    clean: int
    theft: int
    baseline_auc: Optional[float] = None


@dataclass
class AucTable:
    rows: list[AucRow] = field(default_factory=list)

    def level(self, alpha: float) -> AucRow:
        for row in self.rows:
            if np.isclose(row.level, alpha):
                return row
        raise KeyError(alpha)

    @property
    def monotonic(self) -> bool:
        values = [r.auc for r in sorted(self.rows, key=lambda r: r.level)]
        return all(a < b for a, b in zip(values, values[1:]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "level": r.level,
                    "auc": r.auc,
                    "autoencoder_auc": r.baseline_auc,
                    "clean": r.clean,
                    "theft": r.theft,
                }
                for r in self.rows
            ]
        )

    def format(self) -> str:
        lines = [f"{'theft level':<14}{'AUC':>8}{'AE AUC':>10}{'windows':>10}"]
        for r in self.rows:
            ae = f"{r.baseline_auc:.3f}" if r.baseline_auc is not None else "-"
            lines.append(f"{r.level:<14.0%}{r.auc:>8.3f}{ae:>10}{r.clean + r.theft:>10}")
        return "\n".join(lines)


async def _scores(score: Scorer, windows: WindowSet) -> np.ndarray:
    result = score(windows)
    if inspect.isawaitable(result):
        result = await result
    return np.asarray(result, dtype=np.float64)


def fit_baseline(train_windows: WindowSet, steps: int = 200, seed: int = 0) -> AutoencoderBaseline:
    """Autoencoder reference trained on the reported grid windows."""
    if len(train_windows) == 0:
        raise ContractError("no training windows for the autoencoder baseline")
    baseline = AutoencoderBaseline(seq_len=train_windows.seq_len, seed=seed)
    for batch in _cycle(train_windows, steps, seed):
        baseline.fit_step(batch)
    return baseline


def _cycle(windows: WindowSet, steps: int, seed: int) -> Iterator[np.ndarray]:
    done = 0
    epoch = 0
    while done < steps:
        for batch in windows.batches(32, shuffle=True, seed=seed + epoch):
            if done >= steps:
                return
            yield batch.y_window
            done += 1
        epoch += 1


async def experiment_auc(
    score: Scorer,
    evaluation: MeterSeries,
    norm: NormStats,
    seq_len: int,
    stride: int,
    levels: Sequence[float] = DEFAULT_LEVELS,
    baseline: Optional[AutoencoderBaseline] = None,
) -> AucTable:
    """One AUC per theft level on balanced clean/theft evaluation windows."""
    table = AucTable()
    clean_scores: Optional[np.ndarray] = None
    for alpha in levels:
        clean, theft = balanced_windows(evaluation, norm, seq_len, stride, alpha)
        if clean_scores is None:
            clean_scores = await _scores(score, clean)
        theft_scores = await _scores(score, theft)
        row = AucRow(
            level=float(alpha),
            auc=auc(ScoredSet.concat(clean_scores, theft_scores)),
            clean=len(clean),
            theft=len(theft),
        )
        if baseline is not None:
            row.baseline_auc = auc(
                ScoredSet.concat(baseline.score(clean.y_window), baseline.score(theft.y_window))
            )
        logger.info("Theft level %.0f%%: AUC %.3f", alpha * 100, row.auc)
        table.rows.append(row)
    return table
