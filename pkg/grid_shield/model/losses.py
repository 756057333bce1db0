"""Reconstruction, adversarial and discriminator losses."""

from __future__ import annotations

from typing import Literal

import numpy as np

from grid_shield.errors import ShapeError
from grid_shield.model.config import ModelConfig
from grid_shield.model.params import ParamSet
from grid_shield.model.transformer import discriminator, fake_window
from grid_shield.tensor import (
    Tensor,
    add,
    bce_with_logits,
    l2_norm,
    mean,
    sub,
)


def rec_loss(x_hat: Tensor, target: Tensor) -> Tensor:
    """L_rec = E ||T_Target - x_hat||_2, mean over the batch."""
    if x_hat.shape != target.shape:
        raise ShapeError(f"rec_loss shapes differ: {x_hat.shape} vs {target.shape}")
    return mean(l2_norm(sub(target, x_hat)))


def adv_loss(dis: ParamSet, target_window: np.ndarray, x_hat: Tensor, cfg: ModelConfig) -> Tensor:
    """Feature matching: || E f(real window) - E f(predicted window) ||_2.

    The real window is the target history; the predicted window is the same
    history with its last step replaced by ``x_hat``.
    """
    real = Tensor(target_window, dtype=x_hat.dtype)
    real_features, _ = discriminator(dis, real, cfg)
    fake_features, _ = discriminator(dis, fake_window(target_window, x_hat), cfg)
    return l2_norm(sub(mean(real_features, axis=0), mean(fake_features, axis=0)))


def discriminator_loss(
    dis: ParamSet,
    target_window: np.ndarray,
    x_hat: np.ndarray,
    cfg: ModelConfig,
    objective: Literal["bce", "feature_matching"] = "bce",
) -> Tensor:
    """Objective minimised by theta_Dis; ``x_hat`` is a detached prediction."""
    prediction = Tensor(x_hat, dtype=dis.dtype)
    if objective == "feature_matching":
        return adv_loss(dis, target_window, prediction, cfg)

    batch = target_window.shape[0]
    real = Tensor(target_window, dtype=prediction.dtype)
    _, real_logits = discriminator(dis, real, cfg)
    _, fake_logits = discriminator(dis, fake_window(target_window, prediction), cfg)
    ones = np.ones((batch, 1), dtype=prediction.dtype)
    zeros = np.zeros((batch, 1), dtype=prediction.dtype)
    return add(bce_with_logits(real_logits, ones), bce_with_logits(fake_logits, zeros))
