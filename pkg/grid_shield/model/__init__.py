"""Model package - the split GAN-Transformer and its training."""

from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.model.params import ModelParams, ParamSet, init_params
from grid_shield.model.transformer import (
    decode,
    discriminator,
    discriminator_features,
    encode,
    generator_forward,
)
from grid_shield.model.losses import adv_loss, discriminator_loss, rec_loss
from grid_shield.model.optim import SGD, Adam, Optimizer, make_optimizer
from grid_shield.model.trainer import (
    LossRecord,
    OptimizerSet,
    anomaly_score,
    client_backward,
    client_forward,
    predict,
    prediction_error,
    server_update,
    train_step,
)
from grid_shield.model.checkpoint import load_checkpoint, party_tensors, restore_parts, save_checkpoint
from grid_shield.model.autoencoder import AutoencoderBaseline

__all__ = [
    "ModelConfig",
    "TrainConfig",
    "ModelParams",
    "ParamSet",
    "init_params",
    "encode",
    "decode",
    "generator_forward",
    "discriminator",
    "discriminator_features",
    "rec_loss",
    "adv_loss",
    "discriminator_loss",
    "Optimizer",
    "SGD",
    "Adam",
    "make_optimizer",
    "LossRecord",
    "OptimizerSet",
    "client_forward",
    "client_backward",
    "server_update",
    "train_step",
    "predict",
    "prediction_error",
    "anomaly_score",
    "save_checkpoint",
    "load_checkpoint",
    "party_tensors",
    "restore_parts",
    "AutoencoderBaseline",
]
