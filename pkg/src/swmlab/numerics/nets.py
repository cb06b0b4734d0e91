"""MLP and LSTM building blocks on top of the tape primitives.

Both builders register parameters under a caller-supplied prefix so several
networks can share one :class:`~swmlab.numerics.params.ParameterStore`.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ConfigurationError
from . import autodiff as ad
from .autodiff import Node, Tape
from .params import ParameterStore, glorot_uniform

__all__ = ["init_mlp", "mlp_forward", "init_lstm", "lstm_step"]

_ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu, "sigmoid": ad.sigmoid}


def init_mlp(
    store: ParameterStore,
    prefix: str,
    sizes: list[int],
    rng: np.random.Generator,
) -> None:
    """Register weights/biases for a chain of dense layers.

    ``sizes`` lists layer widths input-first, so ``[4, 16, 2]`` is one hidden
    layer of 16 units. Weights are Glorot-uniform, biases zero.
    """
    if len(sizes) < 2:
        raise ConfigurationError(f"mlp {prefix!r} needs at least 2 sizes, got {sizes}")
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if n_in <= 0 or n_out <= 0:
            raise ConfigurationError(f"mlp {prefix!r} layer {i}: sizes must be positive")
        store.add(f"{prefix}.w{i}", glorot_uniform(rng, n_in, n_out))
        store.add(f"{prefix}.b{i}", np.zeros((1, n_out)))


def mlp_forward(
    tape: Tape | None,
    store: ParameterStore,
    prefix: str,
    x: Node,
    n_layers: int,
    activation: str = "tanh",
) -> Node:
    """Apply ``n_layers`` dense layers; activation on all but the last."""
    act = _ACTIVATIONS.get(activation)
    if act is None:
        raise ConfigurationError(f"unknown activation {activation!r}")
    h = x
    for i in range(n_layers):
        w = store.node(f"{prefix}.w{i}")
        b = store.node(f"{prefix}.b{i}")
        h = ad.add(tape, ad.matmul(tape, h, w), b)
        if i < n_layers - 1:
            h = act(tape, h)
    return h


def init_lstm(
    store: ParameterStore,
    prefix: str,
    n_in: int,
    n_hidden: int,
    rng: np.random.Generator,
) -> None:
    """Register one LSTM cell with gates packed as [i, f, g, o]."""
    store.add(f"{prefix}.wx", glorot_uniform(rng, n_in, 4 * n_hidden))
    store.add(f"{prefix}.wh", glorot_uniform(rng, n_hidden, 4 * n_hidden))
    store.add(f"{prefix}.b", np.zeros((1, 4 * n_hidden)))


def lstm_step(
    tape: Tape | None,
    store: ParameterStore,
    prefix: str,
    x: Node,
    h: Node,
    c: Node,
) -> tuple[Node, Node]:
    """One cell update; returns (h_next, c_next) for a batch of rows."""
    n_hidden = h.value.shape[1]
    z = ad.add(
        tape,
        ad.add(
            tape,
            ad.matmul(tape, x, store.node(f"{prefix}.wx")),
            ad.matmul(tape, h, store.node(f"{prefix}.wh")),
        ),
        store.node(f"{prefix}.b"),
    )
    i_g = ad.sigmoid(tape, ad.slice_cols(tape, z, 0, n_hidden))
    f_g = ad.sigmoid(tape, ad.slice_cols(tape, z, n_hidden, 2 * n_hidden))
    g_g = ad.tanh(tape, ad.slice_cols(tape, z, 2 * n_hidden, 3 * n_hidden))
    o_g = ad.sigmoid(tape, ad.slice_cols(tape, z, 3 * n_hidden, 4 * n_hidden))
    c_next = ad.add(tape, ad.mul(tape, f_g, c), ad.mul(tape, i_g, g_g))
    h_next = ad.mul(tape, o_g, ad.tanh(tape, c_next))
    return h_next, c_next
