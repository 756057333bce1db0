"""Parameter sets of the split generator and the discriminator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

import numpy as np

from grid_shield.errors import ConfigurationError
from grid_shield.model.config import ModelConfig
from grid_shield.tensor import Tensor


class ParamSet:
    """Ordered name -> Tensor mapping owned by one party."""

    def __init__(self, tensors: Optional[Mapping[str, Tensor]] = None):
        self._tensors: dict[str, Tensor] = {}
        for name, tensor in (tensors or {}).items():
            self[name] = tensor

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self._tensors[name]
        except KeyError as e:
            raise ConfigurationError(f"missing parameter {name!r}", cause=e) from e

    def __setitem__(self, name: str, tensor: Tensor) -> None:
        tensor.requires_grad = True
        tensor.name = name
        self._tensors[name] = tensor

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def names(self) -> list[str]:
        return list(self._tensors)

    @property
    def dtype(self) -> np.dtype:
        for tensor in self._tensors.values():
            return tensor.dtype
        return np.dtype(np.float32)

    def zero_grad(self) -> None:
        for tensor in self._tensors.values():
            tensor.grad = None

    def copy(self) -> "ParamSet":
        return ParamSet({k: Tensor(v.data.copy(), dtype=v.dtype) for k, v in self._tensors.items()})

    def astype(self, dtype: np.dtype) -> "ParamSet":
        return ParamSet({k: Tensor(v.data.astype(dtype), dtype=dtype) for k, v in self._tensors.items()})

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._tensors.items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        for name, tensor in self._tensors.items():
            if name not in state:
                raise ConfigurationError(f"checkpoint lacks parameter {name!r}")
            value = np.asarray(state[name], dtype=tensor.dtype)
            if value.shape != tensor.shape:
                raise ConfigurationError(
                    f"parameter {name!r} has shape {value.shape}, expected {tensor.shape}"
                )
            tensor.data = value.copy()

    def parameter_count(self) -> int:
        return sum(t.size for t in self._tensors.values())


@dataclass
class ModelParams:
    """theta_Enc (client), theta_Dec and theta_Dis (server)."""

    enc: ParamSet
    dec: ParamSet
    dis: ParamSet

    def parts(self) -> dict[str, ParamSet]:
        return {"enc": self.enc, "dec": self.dec, "dis": self.dis}

    def copy(self) -> "ModelParams":
        return ModelParams(self.enc.copy(), self.dec.copy(), self.dis.copy())

    def astype(self, dtype: np.dtype) -> "ModelParams":
        return ModelParams(self.enc.astype(dtype), self.dec.astype(dtype), self.dis.astype(dtype))


def sinusoidal_table(rows: int, width: int) -> np.ndarray:
    position = np.arange(rows, dtype=np.float64)[:, None]
    freq = np.exp(-np.log(10000.0) * (np.arange(0, width, 2, dtype=np.float64) / width))
    table = np.zeros((rows, width), dtype=np.float64)
    table[:, 0::2] = np.sin(position * freq)
    table[:, 1::2] = np.cos(position * freq)[:, : width // 2]
    return table


class _Init:
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng

    def normal(self, *shape: int) -> Tensor:
        return Tensor(self.rng.normal(0.0, self.cfg.init_std, size=shape).astype(np.float32))

    def glorot(self, fan_in: int, fan_out: int) -> Tensor:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return Tensor(self.rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(np.float32))

    def zeros(self, *shape: int) -> Tensor:
        return Tensor(np.zeros(shape, dtype=np.float32))

    def ones(self, *shape: int) -> Tensor:
        return Tensor(np.ones(shape, dtype=np.float32))

    def pos(self) -> Tensor:
        rows, width = self.cfg.max_seq + 1, self.cfg.d_model
        if self.cfg.pos_init == "sinusoidal":
            return Tensor(sinusoidal_table(rows, width).astype(np.float32))
        return self.normal(rows, width)

    def layer(self, params: ParamSet, prefix: str) -> None:
        d, hidden = self.cfg.d_model, self.cfg.mlp_hidden
        params[f"{prefix}.ln1.g"] = self.ones(d)
        params[f"{prefix}.ln1.b"] = self.zeros(d)
        params[f"{prefix}.attn.qkv"] = self.glorot(d, 3 * d)
        params[f"{prefix}.attn.out"] = self.glorot(d, d)
        params[f"{prefix}.ln2.g"] = self.ones(d)
        params[f"{prefix}.ln2.b"] = self.zeros(d)
        params[f"{prefix}.mlp.w1"] = self.glorot(d, hidden)
        params[f"{prefix}.mlp.b1"] = self.zeros(hidden)
        params[f"{prefix}.mlp.w2"] = self.glorot(hidden, d)
        params[f"{prefix}.mlp.b2"] = self.zeros(d)

    def embedding(self, params: ParamSet, in_dim: int) -> None:
        d = self.cfg.d_model
        params["embed.w"] = self.glorot(in_dim, d)
        params["embed.b"] = self.zeros(d)
        params["cls"] = self.normal(1, d)
        params["pos"] = self.pos()


def init_params(cfg: ModelConfig, seed: int = 0) -> ModelParams:
    """Fresh parameters; the same seed always yields the same values."""
    init = _Init(cfg, np.random.default_rng(seed))
    d = cfg.d_model

    enc = ParamSet()
    init.embedding(enc, cfg.feature_dim)
    for i in range(cfg.split):
        init.layer(enc, f"layer{i}")

    dec = ParamSet()
    for i in range(cfg.split, cfg.layers):
        init.layer(dec, f"layer{i}")
    dec["head.ln.g"] = init.ones(d)
    dec["head.ln.b"] = init.zeros(d)
    dec["head.w"] = init.glorot(d, 1)
    dec["head.b"] = init.zeros(1)

    dis = ParamSet()
    init.embedding(dis, 1)
    for i in range(cfg.dis_layers):
        init.layer(dis, f"layer{i}")
    dis["feat.ln.g"] = init.ones(d)
    dis["feat.ln.b"] = init.zeros(d)
    dis["logit.w"] = init.glorot(d, 1)
    dis["logit.b"] = init.zeros(1)

    return ModelParams(enc=enc, dec=dec, dis=dis)
