"""Tensor package - dense arrays with reverse-mode autodiff."""

from grid_shield.tensor.tensor import Tensor
from grid_shield.tensor.tape import Tape, backward, active_tape
from grid_shield.tensor.ops import (
    add,
    sub,
    mul,
    scale,
    gelu,
    sum_all,
    mean,
    l2_norm,
    matmul,
    softmax_rows,
    layernorm,
    reshape,
    transpose,
    slice_axis,
    select,
    split,
    concat,
    expand_leading,
    bce_with_logits,
)
from grid_shield.tensor.gradcheck import check_gradients, GradCheckResult

__all__ = [
    "Tensor",
    "Tape",
    "backward",
    "active_tape",
    "add",
    "sub",
    "mul",
    "scale",
    "gelu",
    "sum_all",
    "mean",
    "l2_norm",
    "matmul",
    "softmax_rows",
    "layernorm",
    "reshape",
    "transpose",
    "slice_axis",
    "select",
    "split",
    "concat",
    "expand_leading",
    "bce_with_logits",
    "check_gradients",
    "GradCheckResult",
]
