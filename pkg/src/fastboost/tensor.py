"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array plus an optional gradient of the same shape.
Operations (see :mod:`fastboost.ops`) record closures on their output so
that ``backward()`` on a scalar loss walks the recorded graph once, in
reverse execution order, accumulating gradients into every leaf that
requires them.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not line up for the requested operation."""


class GeometryError(ValueError):
    """Spatial geometry is invalid (non-positive output size, oversized window...)."""


class DegenerateBatchError(ValueError):
    """Batch statistics are undefined (a single element per channel)."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf while checked mode was active."""


_GRAD_ENABLED = True
_CHECKED = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / oracle loops)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def set_checked(flag: bool) -> None:
    """Globally toggle checked mode: every op output is verified finite."""
    global _CHECKED
    _CHECKED = bool(flag)


@contextlib.contextmanager
def checked():
    """Enable checked mode inside the block."""
    global _CHECKED
    prev = _CHECKED
    _CHECKED = True
    try:
        yield
    finally:
        _CHECKED = prev


def _verify_finite(data: np.ndarray, op: str) -> None:
    if _CHECKED and not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by op '{op}'")


class Tensor:
    """N-dimensional array with value and gradient storage.

    Image tensors use (N, C, H, W) order. ``grad`` is lazily allocated and
    always matches ``data`` in shape. Repeated ``backward()`` calls
    accumulate into existing gradients; call ``zero_grad()`` between steps.
    """

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None and arr.dtype != dtype:
            arr = arr.astype(dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._op = ""

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        grad = "grad" if self.grad is not None else "no-grad"
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, {grad}, op={self._op or 'leaf'})"

    # -- gradient plumbing ---------------------------------------------

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output.

        Visits each recorded node exactly once, in reverse execution
        order, and accumulates gradients into every requires_grad leaf.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() requires a scalar tensor, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


def make_tensor(
    data: np.ndarray,
    parents: Iterable[Tensor],
    op: str,
    backward: Callable[[], None] | None,
) -> Tensor:
    """Wrap an op result, recording the graph edge when grads are enabled."""
    _verify_finite(data, op)
    parents = tuple(parents)
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = parents
        out._backward = backward
        out._op = op
    return out
