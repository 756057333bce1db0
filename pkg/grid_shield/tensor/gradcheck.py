"""Central finite-difference check of tape gradients, run in float64."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from grid_shield.tensor.tape import Tape
from grid_shield.tensor.tensor import Tensor


@dataclass
class GradCheckResult:
    """Worst relative error over all checked parameters."""

    max_rel_error: float
    worst_param: int
    checked: int

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-4,
) -> GradCheckResult:
    """Compare analytic gradients of ``fn(params)`` with central differences.

    ``params`` are promoted to float64 copies. The relative error of one
    parameter is ``max|analytic - numeric| / max(max|analytic|, max|numeric|)``.
    """
    params64 = [Tensor(p.data.astype(np.float64), requires_grad=True, dtype=np.float64) for p in params]

    with Tape() as tape:
        loss = fn(params64)
    tape.backward(loss)
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params64
    ]

    def evaluate() -> float:
        return float(fn(params64).data)

    worst, worst_index, checked = 0.0, -1, 0
    for index, p in enumerate(params64):
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = evaluate()
            flat[i] = orig - h
            down = evaluate()
            flat[i] = orig
            num_flat[i] = (up - down) / (2.0 * h)
            checked += 1
        scale = max(np.abs(analytic[index]).max(), np.abs(numeric).max(), 1e-12)
        rel = float(np.abs(analytic[index] - numeric).max() / scale)
        if rel > worst:
            worst, worst_index = rel, index
    return GradCheckResult(max_rel_error=worst, worst_param=worst_index, checked=checked)
