"""JSON settings file and logging setup."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Optional, Union

from grid_shield.errors import ConfigurationError, GridShieldError
from grid_shield.evaluation.attack import AttackConfig
from grid_shield.model.config import ModelConfig, TrainConfig
from grid_shield.protocol.session import ProtocolConfig
from grid_shield.splitlearn.threshold import DriftConfig

logger = logging.getLogger(__name__)

LOG_ENV = "SG_LOG"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

_lock = Lock()


@dataclass
class DataConfig:
    """Where the meter series comes from and how it is split."""

    source: Optional[str] = None  # CSV path; synthetic data when unset
    synth_seed: int = 7
    synth_days: int = 28
    households: int = 1
    train_frac: float = 0.7
    gaps: str = "reject"
    levels: list[float] = field(default_factory=lambda: [0.10, 0.20, 0.30])
    quantile: float = 0.99

    def __post_init__(self) -> None:
        if self.synth_days < 1 or self.households < 1:
            raise ConfigurationError("synth_days and households must be >= 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigurationError(f"train_frac must be in (0, 1), got {self.train_frac}")
        if self.gaps not in ("reject", "fill"):
            raise ConfigurationError(f"gaps must be 'reject' or 'fill', got {self.gaps!r}")
        if any(not 0.0 <= a <= 1.0 for a in self.levels):
            raise ConfigurationError("theft levels must be in [0, 1]")
        if not 0.0 < self.quantile <= 1.0:
            raise ConfigurationError(f"quantile must be in (0, 1], got {self.quantile}")

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "synth_seed": self.synth_seed,
            "synth_days": self.synth_days,
            "households": self.households,
            "train_frac": self.train_frac,
            "gaps": self.gaps,
            "levels": list(self.levels),
            "quantile": self.quantile,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DataConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class Settings:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    data: DataConfig = field(default_factory=DataConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    drift: DriftConfig = field(default_factory=DriftConfig)
    reports_dir: str = "reports"
    log_level: str = "info"

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "protocol": self.protocol.to_dict(),
            "data": self.data.to_dict(),
            "attack": self.attack.to_dict(),
            "drift": self.drift.to_dict(),
            "reports_dir": self.reports_dir,
            "log_level": self.log_level,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Settings":
        try:
            return cls(
                model=ModelConfig.from_dict(data.get("model", {})),
                train=TrainConfig.from_dict(data.get("train", {})),
                protocol=ProtocolConfig.from_dict(data.get("protocol", {})),
                data=DataConfig.from_dict(data.get("data", {})),
                attack=AttackConfig.from_dict(data.get("attack", {})),
                drift=DriftConfig.from_dict(data.get("drift", {})),
                reports_dir=str(data.get("reports_dir", "reports")),
                log_level=str(data.get("log_level", "info")),
            )
        except GridShieldError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"invalid settings: {e}", cause=e) from e


def default_settings() -> Settings:
    """Defaults for a fresh checkout."""
    return Settings()


def load_settings(filepath: Optional[Union[str, Path]] = None) -> Settings:
    """Read settings; a missing or unreadable file yields the defaults.

    A file that parses but holds invalid values raises ConfigurationError.
    """
    if filepath is None:
        return default_settings()
    filepath = Path(filepath)
    with _lock:
        if not filepath.exists():
            logger.info("Settings file %s not found, using defaults", filepath)
            return default_settings()
        try:
            with open(filepath, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            logger.warning("Could not read settings %s (%s), using defaults", filepath, e)
            return default_settings()
    if not isinstance(data, dict):
        logger.warning("Settings %s is not a JSON object, using defaults", filepath)
        return default_settings()
    return Settings.from_dict(data)


def save_settings(settings: Settings, filepath: Union[str, Path]) -> None:
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with _lock:
        with open(filepath, "w", encoding="utf-8") as f:
            json.dump(settings.to_dict(), f, ensure_ascii=False, indent=2)


def resolve_log_level(configured: str = "info") -> int:
    """SG_LOG wins over the settings file; unknown names fall back to info."""
    name = os.environ.get(LOG_ENV, "").strip().lower() or configured.strip().lower()
    if name not in LOG_LEVELS:
        logger.warning("Unknown log level %r, using info", name)
        return logging.INFO
    return LOG_LEVELS[name]


def configure_logging(level: Union[int, str] = "info") -> None:
    """Install one stream handler on the root logger. Called once by the CLI."""
    if isinstance(level, str):
        level = resolve_log_level(level)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_grid_shield", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._grid_shield = True  # type: ignore[attr-defined]
    root.addHandler(handler)
    root.setLevel(level)
