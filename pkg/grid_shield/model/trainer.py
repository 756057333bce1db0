"""Training and scoring of the split GAN-Transformer.

A step is written as three halves so the split-learning engine can run
them on different parties:

    client_forward   -> T_Mid
    server_update    -> T_Back = dLoss/dT_Mid, updates theta_Dec / theta_Dis
    client_backward  -> chain rule through the encoder, updates theta_Enc

``train_step`` composes the three in-process with no wire codec in between.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from grid_shield.data.windows import Batch
from grid_shield.errors import NonFiniteError, TrainingDivergedError
from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.model.losses import adv_loss, discriminator_loss, rec_loss
from grid_shield.model.optim import Optimizer, make_optimizer
from grid_shield.model.params import ModelParams, ParamSet
from grid_shield.model.transformer import decode, encode, generator_forward
from grid_shield.tensor import Tape, Tensor, add, mul, scale, sum_all

logger = logging.getLogger(__name__)


@dataclass
class LossRecord:
    """Losses of one step."""

    l_rec: float
    l_adv: float
    l_dis: float = 0.0


@dataclass
class OptimizerSet:
    enc: Optimizer
    dec: Optimizer
    dis: Optimizer

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "OptimizerSet":
        return cls(
            enc=make_optimizer(cfg, cfg.lr),
            dec=make_optimizer(cfg, cfg.lr),
            dis=make_optimizer(cfg, cfg.discriminator_lr),
        )


def client_forward(enc: ParamSet, x: np.ndarray, cfg: ModelConfig) -> tuple[Tape, Tensor]:
    """Encoder pass recorded on a fresh tape kept for the backward half."""
    tape = Tape()
    with tape:
        t_mid = encode(enc, Tensor(x, dtype=enc.dtype), cfg)
    return tape, t_mid


def client_backward(
    enc: ParamSet, tape: Tape, t_mid: Tensor, t_back: np.ndarray, optimizer: Optimizer
) -> None:
    """Push T_Back through the encoder and update theta_Enc.

    Seeding through sum(T_Mid * T_Back) gives dL/dT_Mid = T_Back exactly.
    """
    enc.zero_grad()
    with tape:
        surrogate = sum_all(mul(t_mid, Tensor(t_back, dtype=t_mid.dtype)))
    tape.backward(surrogate)
    optimizer.step(enc)


def server_update(
    dec: ParamSet,
    dis: ParamSet,
    t_mid: np.ndarray,
    y: np.ndarray,
    y_window: np.ndarray,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dec_opt: Optimizer,
    dis_opt: Optimizer,
    step: Optional[int] = None,
) -> tuple[np.ndarray, LossRecord]:
    """Server half of a step. Returns T_Back and the step's losses."""
    leaf = Tensor(t_mid, requires_grad=True, dtype=dec.dtype)
    dec.zero_grad()
    dis.zero_grad()
    try:
        with Tape() as tape:
            x_hat = decode(dec, leaf, model_cfg)
            l_rec = rec_loss(x_hat, Tensor(y, dtype=x_hat.dtype))
            objective = scale(l_rec, train_cfg.lambda_rec)
            if train_cfg.lambda_adv > 0:
                l_adv = adv_loss(dis, y_window, x_hat, model_cfg)
                objective = add(objective, scale(l_adv, train_cfg.lambda_adv))
        if train_cfg.lambda_adv <= 0:
            l_adv = adv_loss(dis, y_window, x_hat.detach(), model_cfg)
        tape.backward(objective)
        t_back = leaf.grad
        assert t_back is not None

        # Discriminator sees a detached prediction; generator grads are already taken.
        dis.zero_grad()
        prediction = x_hat.data.copy()
        with Tape() as dis_tape:
            l_dis = discriminator_loss(
                dis, y_window, prediction, model_cfg, train_cfg.dis_objective
            )
        dis_tape.backward(l_dis)
    except NonFiniteError as e:
        logger.error("Step %s diverged: %s", step, e)
        raise TrainingDivergedError(
            f"non-finite value in train step {step}: {e}", step=step, cause=e
        ) from e

    dec_opt.step(dec)
    dis_opt.step(dis)
    return t_back, LossRecord(l_rec=l_rec.item(), l_adv=l_adv.item(), l_dis=l_dis.item())


def train_step(
    params: ModelParams,
    batch: Batch,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    optimizers: Optional[OptimizerSet] = None,
    step: Optional[int] = None,
) -> LossRecord:
    """One in-process update of all three parameter sets."""
    optimizers = optimizers or OptimizerSet.from_config(train_cfg)
    try:
        tape, t_mid = client_forward(params.enc, batch.x, model_cfg)
    except NonFiniteError as e:
        raise TrainingDivergedError(f"encoder diverged at step {step}", step=step, cause=e) from e
    t_back, record = server_update(
        params.dec,
        params.dis,
        t_mid.data,
        batch.y,
        batch.y_window,
        model_cfg,
        train_cfg,
        optimizers.dec,
        optimizers.dis,
        step=step,
    )
    client_backward(params.enc, tape, t_mid, t_back, optimizers.enc)
    return record


def predict(params: ModelParams, x: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """x_hat for a batch of windows, no tape."""
    return generator_forward(params, Tensor(x, dtype=params.enc.dtype), cfg).data


def anomaly_score(params: ModelParams, x: np.ndarray, y: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Per-window prediction error ||T_Target - x_hat||_2."""
    return prediction_error(predict(params, x, cfg), y)


def prediction_error(x_hat: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = np.asarray(y, dtype=np.float64) - np.asarray(x_hat, dtype=np.float64)
    return np.sqrt((diff * diff).sum(axis=-1))
