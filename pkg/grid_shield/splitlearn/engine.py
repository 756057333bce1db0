"""Training and detection loops over a transport.

A protocol error stops the loop where it happened; the encoder keeps the
updates of every step that completed before it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from grid_shield.data.windows import WindowSet
from grid_shield.errors import ConfigurationError
from grid_shield.model.config import TrainConfig
from grid_shield.model.trainer import LossRecord
from grid_shield.protocol.transport import Transport
from grid_shield.splitlearn.parties import SplitClient

logger = logging.getLogger(__name__)


async def handshake(client: SplitClient, transport: Transport) -> None:
    """Run CS1/SC1; raises the typed protocol error if the server aborts."""
    reply = await transport.exchange(client.hello())
    client.welcome(reply)


async def train_epoch(
    client: SplitClient,
    transport: Transport,
    windows: WindowSet,
    cfg: Optional[TrainConfig] = None,
    epoch: int = 0,
    shuffle: bool = True,
) -> list[LossRecord]:
    """One pass over ``windows``; returns one loss record per batch."""
    cfg = cfg or client.train_cfg
    if not client.session.established:
        await handshake(client, transport)
    log: list[LossRecord] = []
    seed = cfg.seed + epoch
    for step, batch in enumerate(windows.batches(cfg.batch_size, shuffle=shuffle, seed=seed)):
        reply = await transport.exchange(client.forward(batch))
        record = client.backward(reply)
        log.append(record)
        logger.debug("epoch %d step %d l_rec=%.5f l_adv=%.5f", epoch, step, record.l_rec, record.l_adv)
    if log:
        logger.info(
            "Epoch %d: %d steps, last l_rec=%.5f l_adv=%.5f", epoch, len(log), log[-1].l_rec, log[-1].l_adv
        )
    return log


@dataclass
class Detection:
    scores: np.ndarray
    threshold: float

    @property
    def anomalies(self) -> np.ndarray:
        return self.scores > self.threshold

    def labels(self) -> list[str]:
        return ["anomaly" if flag else "normal" for flag in self.anomalies]


async def score_windows(
    client: SplitClient, transport: Transport, windows: WindowSet, batch_size: int = 64
) -> np.ndarray:
    """Per-window anomaly scores computed through the protocol."""
    if not client.trained:
        raise ConfigurationError("detector is untrained; train or load a checkpoint first")
    if not client.session.established:
        await handshake(client, transport)
    scores = []
    for batch in windows.batches(batch_size):
        reply = await transport.exchange(client.infer_request(batch.x, batch.y_window))
        scores.append(client.scores(reply))
    return np.concatenate(scores) if scores else np.zeros(0)


async def detect(
    client: SplitClient, transport: Transport, windows: WindowSet, threshold: float
) -> Detection:
    """anomaly iff score > threshold."""
    scores = await score_windows(client, transport, windows)
    detection = Detection(scores=scores, threshold=float(threshold))
    logger.info("%d of %d windows flagged", int(detection.anomalies.sum()), len(scores))
    return detection
