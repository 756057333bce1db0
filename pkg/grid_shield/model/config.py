"""Model and training configuration."""

from dataclasses import asdict, dataclass, fields
from typing import Literal, Optional

from grid_shield.errors import ConfigurationError


def _known(cls: type, data: dict) -> dict:
    """Keep only keys the dataclass knows - settings files may carry extras."""
    names = {f.name for f in fields(cls)}
    return {k: v for k, v in data.items() if k in names}


@dataclass
class ModelConfig:
    """Shape of the split GAN-Transformer."""

    feature_dim: int = 9  # eight appliance channels plus solar
    d_model: int = 32
    heads: int = 4
    layers: int = 4
    split: int = 2  # layers kept on the client
    mlp_ratio: int = 2
    max_seq: int = 96
    dis_layers: int = 2
    pos_init: Literal["sinusoidal", "normal"] = "sinusoidal"
    init_std: float = 0.02
    ln_eps: float = 1e-5

    def __post_init__(self) -> None:
        if self.feature_dim < 1:
            raise ConfigurationError("feature_dim must be >= 1")
        if self.heads < 1 or self.d_model % self.heads != 0:
            raise ConfigurationError(
                f"d_model={self.d_model} must be a multiple of heads={self.heads}"
            )
        if not 1 <= self.split < self.layers:
            raise ConfigurationError(
                f"split index must satisfy 1 <= split < layers, got {self.split}/{self.layers}"
            )
        if self.dis_layers < 1:
            raise ConfigurationError("discriminator needs at least one layer")
        if self.pos_init not in ("sinusoidal", "normal"):
            raise ConfigurationError(f"unknown pos_init {self.pos_init!r}")
        if self.ln_eps <= 0:
            raise ConfigurationError("ln_eps must be > 0")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    @property
    def mlp_hidden(self) -> int:
        return self.d_model * self.mlp_ratio

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**_known(cls, data))


@dataclass
class TrainConfig:
    """Loss weights and optimiser settings.

    Defaults: plain SGD with eta=1e-3, lambda_rec=50, lambda_adv=1 and one-day
    windows of 96 fifteen-minute steps.
    """

    lambda_rec: float = 50.0
    lambda_adv: float = 1.0
    lr: float = 1e-3
    dis_lr: Optional[float] = None
    batch_size: int = 16
    seq_len: int = 96
    stride: int = 24
    epochs: int = 1
    seed: int = 0
    optimizer: Literal["sgd", "adam"] = "sgd"
    dis_objective: Literal["bce", "feature_matching"] = "bce"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.lambda_rec < 0 or self.lambda_adv < 0:
            raise ConfigurationError("loss weights must be >= 0")
        if self.lr < 0 or (self.dis_lr is not None and self.dis_lr < 0):
            raise ConfigurationError("learning rate must be >= 0")
        if self.batch_size < 1 or self.seq_len < 1 or self.stride < 1 or self.epochs < 0:
            raise ConfigurationError("batch_size, seq_len and stride must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.dis_objective not in ("bce", "feature_matching"):
            raise ConfigurationError(f"unknown discriminator objective {self.dis_objective!r}")

    @property
    def discriminator_lr(self) -> float:
        return self.lr if self.dis_lr is None else self.dis_lr

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**_known(cls, data))
