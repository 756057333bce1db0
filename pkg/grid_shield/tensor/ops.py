"""Differentiable primitives.

Broadcasting is limited to adding a vector along the last axis (bias add);
every other binary op needs identical shapes.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from grid_shield.errors import ShapeError
from grid_shield.tensor.tape import VJP, active_tape
from grid_shield.tensor.tensor import Tensor

_GELU_C = math.sqrt(2.0 / math.pi)


def _result(op: str, data: np.ndarray, parents: tuple[Tensor, ...], vjp: VJP) -> Tensor:
    tape = active_tape()
    track = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor._wrap(data, requires_grad=track)
    if track:
        assert tape is not None
        tape.record(op, out, parents, vjp)
    return out


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


# --- elementwise ---


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b, where b has a's shape or is a bias vector over a's last axis."""
    if a.shape == b.shape:
        return _result("add", a.data + b.data, (a, b), lambda g: (g, g))
    if b.ndim == 1 and a.ndim >= 1 and b.shape[0] == a.shape[-1]:
        width = b.shape[0]
        return _result(
            "bias_add",
            a.data + b.data,
            (a, b),
            lambda g: (g, g.reshape(-1, width).sum(axis=0)),
        )
    raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    av, bv = a.data, b.data
    return _result("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, factor: float) -> Tensor:
    c = a.data.dtype.type(factor)
    return _result("scale", a.data * c, (a,), lambda g: (g * c,))


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh form."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner),)

    return _result("gelu", out.astype(x.dtype, copy=False), (a,), vjp)


# --- reductions ---


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return _result(
        "sum",
        np.asarray(a.data.sum(), dtype=a.dtype),
        (a,),
        lambda g: (np.broadcast_to(g, shape).astype(g.dtype),),
    )


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Mean over all elements (scalar) or over one axis (axis removed)."""
    shape = a.shape
    if axis is None:
        n = a.size
        return _result(
            "mean",
            np.asarray(a.data.mean(), dtype=a.dtype),
            (a,),
            lambda g: (np.full(shape, g / n, dtype=a.dtype),),
        )
    axis = axis % a.ndim
    n = shape[axis]

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.broadcast_to(np.expand_dims(g, axis) / n, shape).astype(a.dtype),)

    return _result("mean_axis", a.data.mean(axis=axis).astype(a.dtype), (a,), vjp)


def l2_norm(a: Tensor) -> Tensor:
    """Euclidean norm over the last axis. Gradient at the origin is taken as 0."""
    x = a.data
    norm = np.asarray(np.sqrt((x * x).sum(axis=-1)))

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        safe = np.where(norm > 0, norm, 1.0)
        unit = np.where(norm[..., None] > 0, x / safe[..., None], 0.0)
        return ((g[..., None] * unit).astype(x.dtype),)

    return _result("l2_norm", norm.astype(x.dtype), (a,), vjp)


# --- linear algebra ---


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes.

    ``b`` is either a 2-D weight shared by every leading index of ``a`` or has
    the same leading dims as ``a``.
    """
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    if b.ndim != 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul batch dimensions differ: {a.shape} @ {b.shape}")

    av, bv = a.data, b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ _swap(bv)
        if bv.ndim == 2:
            k, n = bv.shape
            gb = av.reshape(-1, k).T @ g.reshape(-1, n)
        else:
            gb = _swap(av) @ g
        return ga, gb

    return _result("matmul", av @ bv, (a, b), vjp)


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row max."""
    x = a.data
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _result("softmax", s, (a,), vjp)


def layernorm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then gain and bias."""
    if gain.shape != (a.shape[-1],) or bias.shape != (a.shape[-1],):
        raise ShapeError(f"layernorm affine params must be ({a.shape[-1]},)")
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    gv = gain.data
    out = xhat * gv + bias.data
    width = x.shape[-1]

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gx = g * gv
        dx = inv * (
            gx
            - gx.mean(axis=-1, keepdims=True)
            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        )
        dgain = (g * xhat).reshape(-1, width).sum(axis=0)
        dbias = g.reshape(-1, width).sum(axis=0)
        return dx, dgain, dbias

    return _result("layernorm", out.astype(x.dtype, copy=False), (a, gain, bias), vjp)


# --- shape plumbing ---


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise ShapeError(f"cannot reshape {src} to {tuple(shape)}", cause=e) from e
    return _result("reshape", out, (a,), lambda g: (g.reshape(src),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"bad transpose axes {axes} for rank {a.ndim}")
    inverse = tuple(np.argsort(axes))
    return _result("transpose", a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def slice_axis(a: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    axis = axis % a.ndim
    if not 0 <= start < stop <= a.shape[axis]:
        raise ShapeError(f"slice [{start}:{stop}] out of range for axis of size {a.shape[axis]}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    idx = tuple(index)
    shape, dtype = a.shape, a.dtype

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(shape, dtype=dtype)
        full[idx] = g
        return (full,)

    return _result("slice", a.data[idx], (a,), vjp)


def select(a: Tensor, index: int, axis: int = 0) -> Tensor:
    """Pick one position along ``axis`` and drop that axis."""
    axis = axis % a.ndim
    picked = slice_axis(a, index, index + 1, axis)
    new_shape = a.shape[:axis] + a.shape[axis + 1:]
    return reshape(picked, new_shape)


def split(a: Tensor, sizes: Sequence[int], axis: int = -1) -> list[Tensor]:
    axis = axis % a.ndim
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis of size {a.shape[axis]}")
    parts, start = [], 0
    for size in sizes:
        parts.append(slice_axis(a, start, start + size, axis))
        start += size
    return parts


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ShapeError("concat of nothing")
    rank = tensors[0].ndim
    axis = axis % rank
    for t in tensors[1:]:
        if t.ndim != rank or t.shape[:axis] + t.shape[axis + 1:] != tensors[0].shape[:axis] + tensors[0].shape[axis + 1:]:
            raise ShapeError(f"concat shapes disagree off axis {axis}: {[x.shape for x in tensors]}")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def vjp(g: np.ndarray) -> list[np.ndarray]:
        grads = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            index = [slice(None)] * rank
            index[axis] = slice(int(lo), int(hi))
            grads.append(g[tuple(index)])
        return grads

    return _result("concat", np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def expand_leading(a: Tensor, n: int) -> Tensor:
    """Repeat ``a`` along a new leading axis of size ``n``."""
    out = np.broadcast_to(a.data, (n,) + a.shape).copy()
    return _result("expand", out, (a,), lambda g: (g.sum(axis=0),))


# --- losses ---


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy against constant 0/1 targets."""
    if logits.shape != targets.shape:
        raise ShapeError(f"bce targets {targets.shape} vs logits {logits.shape}")
    z = logits.data
    t = targets.astype(z.dtype)
    loss = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))
        return ((g * (sig - t) / n).astype(z.dtype),)

    return _result("bce", np.asarray(loss.mean(), dtype=z.dtype), (logits,), vjp)
