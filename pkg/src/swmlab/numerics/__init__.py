"""Minimal dense-tensor numerics with reverse-mode differentiation.

Everything learned in this package runs on 2-D float64 arrays, a recording
tape, and the small set of primitive operations in :mod:`.autodiff`. Network
cells live in :mod:`.nets`, parameters and Adam in :mod:`.params`,
categorical utilities in :mod:`.stats`, and the finite-difference gradient
checker in :mod:`.gradcheck`.
"""

from .autodiff import Node, Tape, backward, constant
from .gradcheck import finite_diff_check
from .params import AdamState, Param, ParameterStore, adam_update, glorot_uniform
from .stats import categorical_sample, kl_categorical_to_uniform, one_hot, softmax

__all__ = [
    "AdamState",
    "Node",
    "Param",
    "ParameterStore",
    "Tape",
    "adam_update",
    "backward",
    "categorical_sample",
    "constant",
    "finite_diff_check",
    "glorot_uniform",
    "kl_categorical_to_uniform",
    "one_hot",
    "softmax",
]
