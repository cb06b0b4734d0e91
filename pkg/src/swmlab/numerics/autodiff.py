"""Tape-based reverse-mode automatic differentiation on 2-D float64 arrays.

A :class:`Node` pairs a value with a lazily allocated gradient buffer; a
:class:`Tape` records one backward closure per primitive operation in
execution order, which is a valid topological order of the forward DAG.
Replaying the tape in reverse visits every recorded operation exactly once
and accumulates exact adjoints into every participating node.

Conventions:

- every value is a 2-D ``np.float64`` array; scalars are shape (1, 1);
- parameter leaves share their ``grad`` buffer with a
  :class:`~swmlab.numerics.params.ParameterStore` accumulator, so backward
  *increments* stored gradients rather than overwriting them;
- nodes flagged ``const`` never receive gradients, and operations whose
  inputs are all const record nothing, keeping constant-encoding subgraphs
  off the tape;
- passing ``tape=None`` to any operation computes the value only, which is
  the fast path for inference.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

__all__ = ["Node", "Tape", "backward", "constant"]


def as_matrix(x) -> np.ndarray:
    """Coerce scalars / 1-D arrays to a 2-D float64 array (rows of data)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


class Node:
    """A value in the forward computation, with an adjoint slot."""

    __slots__ = ("value", "grad", "const")

    def __init__(self, value: np.ndarray, grad: np.ndarray | None = None, const: bool = False):
        self.value = value
        self.grad = grad
        self.const = const

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Node(shape={self.value.shape}, const={self.const})"


def constant(x) -> Node:
    """Wrap data that should never receive a gradient."""
    return Node(as_matrix(x), const=True)


class Tape:
    """Ordered record of primitive operations from one forward pass."""

    __slots__ = ("_ops",)

    def __init__(self):
        self._ops: list = []

    def push(self, back_fn) -> None:
        self._ops.append(back_fn)

    def __len__(self) -> int:
        return len(self._ops)

    def backward(self, loss: Node, adjoint: float = 1.0) -> None:
        """Seed ``loss`` with ``adjoint`` and replay all ops in reverse."""
        _seed(loss, adjoint)
        for fn in reversed(self._ops):
            fn()


def backward(tape: Tape, loss: Node, adjoint: float = 1.0) -> None:
    """Module-level alias for :meth:`Tape.backward`; empty tape is a no-op."""
    tape.backward(loss, adjoint)


def _seed(node: Node, adjoint: float) -> None:
    if node.const:
        return
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += adjoint


def _acc(node: Node, g: np.ndarray) -> None:
    if node.const:
        return
    if node.grad is None:
        node.grad = np.array(g, dtype=np.float64)
    else:
        node.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _record(tape: Tape | None, out: Node, back_fn) -> Node:
    if tape is not None and not out.const:
        tape.push(back_fn)
    return out


# ---------------------------------------------------------------------------
# Primitive operations. Each computes the forward value and, when a tape is
# supplied and any input requires gradients, records a closure that pulls
# out.grad and accumulates into the inputs.
# ---------------------------------------------------------------------------


def matmul(tape: Tape | None, a: Node, b: Node) -> Node:
    out = Node(a.value @ b.value, const=a.const and b.const)

    def back():
        g = out.grad
        if g is None:
            return
        if not a.const:
            _acc(a, g @ b.value.T)
        if not b.const:
            _acc(b, a.value.T @ g)

    return _record(tape, out, back)


def add(tape: Tape | None, a: Node, b: Node) -> Node:
    out = Node(a.value + b.value, const=a.const and b.const)

    def back():
        g = out.grad
        if g is None:
            return
        if not a.const:
            _acc(a, _unbroadcast(g, a.value.shape))
        if not b.const:
            _acc(b, _unbroadcast(g, b.value.shape))

    return _record(tape, out, back)


def sub(tape: Tape | None, a: Node, b: Node) -> Node:
    out = Node(a.value - b.value, const=a.const and b.const)

    def back():
        g = out.grad
        if g is None:
            return
        if not a.const:
            _acc(a, _unbroadcast(g, a.value.shape))
        if not b.const:
            _acc(b, -_unbroadcast(g, b.value.shape))

    return _record(tape, out, back)


def mul(tape: Tape | None, a: Node, b: Node) -> Node:
    out = Node(a.value * b.value, const=a.const and b.const)

    def back():
        g = out.grad
        if g is None:
            return
        if not a.const:
            _acc(a, _unbroadcast(g * b.value, a.value.shape))
        if not b.const:
            _acc(b, _unbroadcast(g * a.value, b.value.shape))

    return _record(tape, out, back)


def scale(tape: Tape | None, a: Node, s: float) -> Node:
    out = Node(a.value * s, const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * s)

    return _record(tape, out, back)


def add_const(tape: Tape | None, a: Node, c) -> Node:
    """Add a plain array/scalar that carries no gradient."""
    out = Node(a.value + c, const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad)

    return _record(tape, out, back)


def neg(tape: Tape | None, a: Node) -> Node:
    return scale(tape, a, -1.0)


def square(tape: Tape | None, a: Node) -> Node:
    out = Node(a.value * a.value, const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, 2.0 * a.value * out.grad)

    return _record(tape, out, back)


def exp(tape: Tape | None, a: Node) -> Node:
    out = Node(np.exp(a.value), const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * out.value)

    return _record(tape, out, back)


def tanh(tape: Tape | None, a: Node) -> Node:
    out = Node(np.tanh(a.value), const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * (1.0 - out.value * out.value))

    return _record(tape, out, back)


def sigmoid(tape: Tape | None, a: Node) -> Node:
    out = Node(expit(a.value), const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * out.value * (1.0 - out.value))

    return _record(tape, out, back)


def relu(tape: Tape | None, a: Node) -> Node:
    out = Node(np.maximum(a.value, 0.0), const=a.const)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * (a.value > 0.0))

    return _record(tape, out, back)


def softmax_rows(tape: Tape | None, a: Node) -> Node:
    """Row-wise softmax with max subtraction."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    out = Node(p, const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        _acc(a, p * (g - (g * p).sum(axis=1, keepdims=True)))

    return _record(tape, out, back)


def log_softmax_rows(tape: Tape | None, a: Node) -> Node:
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = Node(shifted - lse, const=a.const)
    p = np.exp(out.value)

    def back():
        g = out.grad
        if g is None:
            return
        _acc(a, g - p * g.sum(axis=1, keepdims=True))

    return _record(tape, out, back)


def sum_all(tape: Tape | None, a: Node) -> Node:
    out = Node(np.array([[a.value.sum()]]), const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        _acc(a, np.full_like(a.value, g[0, 0]))

    return _record(tape, out, back)


def mean_all(tape: Tape | None, a: Node) -> Node:
    return scale(tape, sum_all(tape, a), 1.0 / a.value.size)


def concat_cols(tape: Tape | None, parts: list[Node]) -> Node:
    out = Node(
        np.concatenate([p.value for p in parts], axis=1),
        const=all(p.const for p in parts),
    )
    offsets = np.cumsum([0] + [p.value.shape[1] for p in parts])

    def back():
        g = out.grad
        if g is None:
            return
        for p, j0, j1 in zip(parts, offsets[:-1], offsets[1:]):
            if not p.const:
                _acc(p, g[:, j0:j1])

    return _record(tape, out, back)


def slice_cols(tape: Tape | None, a: Node, j0: int, j1: int) -> Node:
    out = Node(a.value[:, j0:j1], const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        ga = np.zeros_like(a.value)
        ga[:, j0:j1] = g
        _acc(a, ga)

    return _record(tape, out, back)


def reshape(tape: Tape | None, a: Node, rows: int, cols: int) -> Node:
    out = Node(a.value.reshape(rows, cols), const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        _acc(a, g.reshape(a.value.shape))

    return _record(tape, out, back)


def repeat_rows(tape: Tape | None, a: Node, times: int) -> Node:
    """Repeat each row ``times`` consecutive times."""
    out = Node(np.repeat(a.value, times, axis=0), const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        rows, cols = a.value.shape
        _acc(a, g.reshape(rows, times, cols).sum(axis=1))

    return _record(tape, out, back)


def take_per_row(tape: Tape | None, a: Node, indices: np.ndarray) -> Node:
    """Select one column per row; output shape (rows, 1)."""
    rows = np.arange(a.value.shape[0])
    out = Node(a.value[rows, indices].reshape(-1, 1), const=a.const)

    def back():
        g = out.grad
        if g is None:
            return
        ga = np.zeros_like(a.value)
        ga[rows, indices] = g[:, 0]
        _acc(a, ga)

    return _record(tape, out, back)


def clip(tape: Tape | None, a: Node, lo: float, hi: float) -> Node:
    out = Node(np.clip(a.value, lo, hi), const=a.const)
    mask = (a.value > lo) & (a.value < hi)

    def back():
        if out.grad is not None:
            _acc(a, out.grad * mask)

    return _record(tape, out, back)


def minimum(tape: Tape | None, a: Node, b: Node) -> Node:
    """Elementwise minimum; ties route the gradient to ``a``."""
    take_a = a.value <= b.value
    out = Node(np.where(take_a, a.value, b.value), const=a.const and b.const)

    def back():
        g = out.grad
        if g is None:
            return
        if not a.const:
            _acc(a, g * take_a)
        if not b.const:
            _acc(b, g * ~take_a)

    return _record(tape, out, back)
