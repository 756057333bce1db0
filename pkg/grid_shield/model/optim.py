"""In-place optimisers over a ParamSet."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from grid_shield.model.config import TrainConfig
from grid_shield.model.params import ParamSet


class Optimizer(ABC):
    """Applies the gradients currently stored on a ParamSet."""

    def __init__(self, lr: float):
        self.lr = lr

    @abstractmethod
    def step(self, params: ParamSet) -> None:
        """Update every parameter that has a gradient."""


class SGD(Optimizer):
    """theta <- theta - eta * grad."""

    def step(self, params: ParamSet) -> None:
        for _, p in params.items():
            if p.grad is None:
                continue
            p.data -= (p.grad * p.dtype.type(self.lr)).astype(p.dtype, copy=False)


class Adam(Optimizer):
    """Adam with per-parameter moment buffers keyed by name."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ParamSet) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            if p.grad is None:
                continue
            g = p.grad.astype(np.float64)
            m = self._m.get(name, np.zeros_like(g))
            v = self._v.get(name, np.zeros_like(g))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name], self._v[name] = m, v
            update = self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= update.astype(p.dtype)


def make_optimizer(cfg: TrainConfig, lr: float) -> Optimizer:
    if cfg.optimizer == "adam":
        return Adam(lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    return SGD(lr)
