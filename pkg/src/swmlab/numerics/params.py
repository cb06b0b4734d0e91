"""Named parameter storage, initialization, and the Adam update rule.

A :class:`ParameterStore` owns a flat dict of named 2-D arrays together
with persistent gradient accumulators. Calling :meth:`ParameterStore.node`
binds a parameter into a computation as a leaf :class:`Node` whose ``grad``
buffer *is* the store's accumulator, so tape replay writes gradients
straight into the store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node

__all__ = [
    "Param",
    "ParameterStore",
    "AdamState",
    "adam_update",
    "glorot_uniform",
]


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray


class ParameterStore:
    """Flat mapping of parameter names to values with grad accumulators."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self._params:
            raise KeyError(f"duplicate parameter name: {name!r}")
        v = np.asarray(value, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"parameter {name!r} must be 2-D, got shape {v.shape}")
        self._params[name] = Param(value=v, grad=np.zeros_like(v))

    def node(self, name: str) -> Node:
        """Leaf node sharing the stored grad buffer (accumulates in place)."""
        p = self._params[name]
        return Node(p.value, grad=p.grad)

    def value(self, name: str) -> np.ndarray:
        return self._params[name].value

    def grad(self, name: str) -> np.ndarray:
        return self._params[name].grad

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[:] = 0.0

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params.keys())

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def n_scalars(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def clone_values(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for k, p in self._params.items():
            p.value[:] = values[k]


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like the store."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(store: ParameterStore, state: AdamState) -> None:
    """One Adam step over every parameter, then zero the gradients."""
    state.t += 1
    b1t = 1.0 - state.beta1 ** state.t
    b2t = 1.0 - state.beta2 ** state.t
    for name, p in store.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p.value)
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (p.grad * p.grad)
        p.value -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.eps)
        p.grad[:] = 0.0
