"""Dense tensor value that can take part in a gradient tape."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from grid_shield.errors import NonFiniteError

ArrayLike = Union[np.ndarray, list, float, int]


class Tensor:
    """Row-major numeric array with an optional gradient buffer.

    Storage is float32 unless ``dtype`` asks for something else (the
    finite-difference checker runs whole graphs in float64). Scalars keep
    shape ().
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        self.data: np.ndarray = np.require(data, dtype=np.float32 if dtype is None else dtype, requirements="C")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        """Build an op result; rejects NaN/Inf so every public op stays finite."""
        if not np.isfinite(data).all():
            raise NonFiniteError("operation produced non-finite values")
        out = cls.__new__(cls)
        out.data = np.require(data, requirements="C")
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        return out

    @classmethod
    def zeros(cls, *shape: int, requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.float32), requires_grad=requires_grad)

    @classmethod
    def ones(cls, *shape: int, requires_grad: bool = False) -> "Tensor":
        return cls(np.ones(shape, dtype=np.float32), requires_grad=requires_grad)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same values, no gradient tracking."""
        return Tensor(self.data.copy(), requires_grad=False, dtype=self.dtype)

    def astype(self, dtype: np.dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, name=self.name, dtype=dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the functional forms live in grid_shield.tensor.ops

    def __add__(self, other: "Tensor") -> "Tensor":
        from grid_shield.tensor import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from grid_shield.tensor import ops
        return ops.sub(self, other)

    def __mul__(self, other: Union["Tensor", float]) -> "Tensor":
        from grid_shield.tensor import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from grid_shield.tensor import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from grid_shield.tensor import ops
        return ops.matmul(self, other)
