"""Fixed-point codec: float tensors <-> 32-bit two's-complement words.

A value v is stored as round(v * 2^frac_bits), clamped to the int32 range.
Clamped elements are counted on the blob, not treated as errors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from grid_shield.errors import ContractError, NonFiniteError

logger = logging.getLogger(__name__)

INT32_MIN = -(2 ** 31)
INT32_MAX = 2 ** 31 - 1
MAX_FRAC_BITS = 30
DEFAULT_FRAC_BITS = 16
DEFAULT_GRAD_CLIP = 8.0


@dataclass
class IntBlob:
    """Quantized tensor: uint32 words plus the shape and scale to read them back."""

    shape: tuple[int, ...]
    frac_bits: int
    words: np.ndarray  # uint32, flat
    saturated: int = 0
    masked: bool = False

    def __post_init__(self) -> None:
        self.shape = tuple(int(d) for d in self.shape)
        self.words = np.ascontiguousarray(self.words, dtype=np.uint32).reshape(-1)
        expected = int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1
        if self.words.size != expected:
            raise ContractError(f"{self.words.size} words do not fill shape {self.shape}")

    def __len__(self) -> int:
        return int(self.words.size)

    def same_bits(self, other: "IntBlob") -> bool:
        return (
            self.shape == other.shape
            and self.frac_bits == other.frac_bits
            and np.array_equal(self.words, other.words)
        )


def _check_frac_bits(frac_bits: int) -> None:
    if not 0 <= frac_bits <= MAX_FRAC_BITS:
        raise ContractError(f"frac_bits must be in [0, {MAX_FRAC_BITS}], got {frac_bits}")


def representable_limit(frac_bits: int) -> float:
    """Largest magnitude that quantizes without saturating."""
    return float(INT32_MAX) / float(2 ** frac_bits)


def quantize(values: np.ndarray, frac_bits: int = DEFAULT_FRAC_BITS) -> IntBlob:
    _check_frac_bits(frac_bits)
    arr = np.asarray(values, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteError("cannot quantize non-finite values")
    scaled = np.rint(arr * float(2 ** frac_bits))
    clamped = np.clip(scaled, INT32_MIN, INT32_MAX)
    saturated = int(np.count_nonzero(clamped != scaled))
    if saturated:
        logger.warning("Quantization saturated %d of %d values at frac_bits=%d", saturated, arr.size, frac_bits)
    words = clamped.astype(np.int64).astype(np.int32).view(np.uint32)
    return IntBlob(shape=arr.shape, frac_bits=frac_bits, words=words, saturated=saturated)


def dequantize(blob: IntBlob, dtype: type = np.float32) -> np.ndarray:
    if blob.masked:
        raise ContractError("demask the blob before dequantizing it")
    signed = blob.words.view(np.int32).astype(np.float64)
    return (signed / float(2 ** blob.frac_bits)).reshape(blob.shape).astype(dtype)


def clip_to_range(values: np.ndarray, clip: float = DEFAULT_GRAD_CLIP, frac_bits: int = DEFAULT_FRAC_BITS) -> np.ndarray:
    """Clip to +-min(clip, representable range) before serialization."""
    limit = min(float(clip), representable_limit(frac_bits))
    return np.clip(values, -limit, limit)
