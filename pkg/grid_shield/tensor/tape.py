"""Reverse-mode gradient tape.

Ops record a node on the active tape whenever one of their inputs requires a
gradient. Nodes are appended as ops run, so the list is already in
topological order; ``backward`` walks it once in reverse.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from grid_shield.errors import ContractError, NonFiniteError
from grid_shield.tensor.tensor import Tensor

VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE: contextvars.ContextVar[Optional["Tape"]] = contextvars.ContextVar(
    "grid_shield_tape", default=None
)


@dataclass
class Node:
    """One recorded primitive: output, its parents and the vector-Jacobian product."""

    op: str
    out: Tensor
    parents: tuple[Tensor, ...]
    vjp: VJP


class Tape:
    """Records ops inside a ``with`` block. One tape per training step."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, out: Tensor, parents: tuple[Tensor, ...], vjp: VJP) -> None:
        self.nodes.append(Node(op, out, parents, vjp))

    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` of every gradient-requiring leaf on the tape."""
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.nodes:
            raise ContractError("backward called on an empty tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        produced = {id(node.out) for node in self.nodes}
        leaves: dict[int, Tensor] = {}

        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.out), None)
            if upstream is None:
                continue
            parent_grads = node.vjp(upstream)
            for parent, g in zip(node.parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                if key not in produced:
                    leaves[key] = parent

        for key, leaf in leaves.items():
            g = grads[key]
            if not np.isfinite(g).all():
                raise NonFiniteError(f"non-finite gradient for {leaf!r}")
            leaf.grad = g.astype(leaf.data.dtype, copy=False).reshape(leaf.shape)


def active_tape() -> Optional[Tape]:
    return _ACTIVE.get()


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """Run the backward pass of ``loss`` on ``tape`` (default: the active one)."""
    tape = tape or active_tape()
    if tape is None:
        raise ContractError("backward called without a tape")
    tape.backward(loss)
