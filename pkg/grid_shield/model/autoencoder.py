"""Minimal dense autoencoder over the reported grid window.

Sanity baseline only: it reconstructs the window it is given, so a
multiplicative under-report of the whole window is largely invisible to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from grid_shield.model.optim import Adam
from grid_shield.model.params import ParamSet
from grid_shield.tensor import Tape, Tensor, add, gelu, matmul, mean, mul, sub


@dataclass
class AutoencoderBaseline:
    """window [batch, seq, 1] -> bottleneck -> window."""

    seq_len: int
    bottleneck: int = 4
    seed: int = 0
    lr: float = 1e-2

    def __post_init__(self) -> None:
        rng = np.random.default_rng(self.seed)
        limit = np.sqrt(6.0 / (self.seq_len + self.bottleneck))
        self.params = ParamSet(
            {
                "w_in": Tensor(rng.uniform(-limit, limit, (self.seq_len, self.bottleneck)).astype(np.float32)),
                "b_in": Tensor(np.zeros(self.bottleneck, dtype=np.float32)),
                "w_out": Tensor(rng.uniform(-limit, limit, (self.bottleneck, self.seq_len)).astype(np.float32)),
                "b_out": Tensor(np.zeros(self.seq_len, dtype=np.float32)),
            }
        )
        self._opt = Adam(self.lr)

    def _reconstruct(self, flat: Tensor) -> Tensor:
        p = self.params
        hidden = gelu(add(matmul(flat, p["w_in"]), p["b_in"]))
        return add(matmul(hidden, p["w_out"]), p["b_out"])

    def fit_step(self, windows: np.ndarray) -> float:
        flat = Tensor(windows.reshape(windows.shape[0], -1).astype(np.float32))
        self.params.zero_grad()
        with Tape() as tape:
            diff = sub(self._reconstruct(flat), flat)
            loss = mean(mul(diff, diff))
        tape.backward(loss)
        self._opt.step(self.params)
        return loss.item()

    def score(self, windows: np.ndarray) -> np.ndarray:
        flat = windows.reshape(windows.shape[0], -1).astype(np.float32)
        recon = self._reconstruct(Tensor(flat)).data
        return np.sqrt(((recon - flat) ** 2).sum(axis=-1))
