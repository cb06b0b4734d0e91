"""Masked-action policy and value networks.

Both heads consume [observation | flattened belief rows]. Invalid actions
get a -1e30 logit offset before the softmax: large enough that their
probability underflows to exactly zero, finite enough that 0 * logit stays
zero (never NaN) inside entropy sums. Output layers start at zero so a
fresh policy is uniform over the valid set.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import ContractViolation
from ..numerics import autodiff as ad
from ..numerics.autodiff import Node, Tape, constant
from ..numerics.nets import init_mlp, mlp_forward
from ..numerics.params import ParameterStore
from ..numerics.stats import categorical_sample, softmax

__all__ = ["PolicyNetwork", "policy_act", "MASK_OFFSET"]

MASK_OFFSET = -1e30


class PolicyNetwork:
    """Separate parameter stores for the action and value heads."""

    def __init__(
        self,
        obs_dim: int,
        belief_dim: int,
        n_actions: int,
        hidden: int,
        rng: np.random.Generator,
    ):
        self.obs_dim = obs_dim
        self.belief_dim = belief_dim
        self.in_dim = obs_dim + belief_dim
        self.n_actions = n_actions
        self.n_layers = 3
        self.pol_store = ParameterStore()
        self.val_store = ParameterStore()
        init_mlp(self.pol_store, "pol", [self.in_dim, hidden, hidden, n_actions], rng)
        init_mlp(self.val_store, "val", [self.in_dim, hidden, hidden, 1], rng)
        self.pol_store.value("pol.w2")[:] = 0.0
        self.val_store.value("val.w2")[:] = 0.0

    def logits(self, tape: Tape | None, x: Node) -> Node:
        return mlp_forward(tape, self.pol_store, "pol", x, self.n_layers)

    def value(self, tape: Tape | None, x: Node) -> Node:
        return mlp_forward(tape, self.val_store, "val", x, self.n_layers)


def masked_logits_np(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return logits + MASK_OFFSET * (~np.asarray(mask, dtype=bool))


def policy_act(
    policy: PolicyNetwork,
    obs: np.ndarray,
    belief: np.ndarray,
    mask: np.ndarray,
    rng: np.random.Generator,
    greedy: bool = False,
) -> tuple[int, float, float]:
    """Sample (or argmax) a mechanism action; returns (action, log-prob, value)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ContractViolation("no valid mechanism action under the mask")
    x = constant(np.concatenate([obs, np.asarray(belief).ravel()]).reshape(1, -1))
    logits = policy.logits(None, x).value.ravel()
    probs = softmax(masked_logits_np(logits, mask), row_wise=False)
    if greedy:
        action = int(np.argmax(probs))
    else:
        action = categorical_sample(rng, probs)
    log_prob = float(np.log(max(probs[action], 1e-12)))
    value = float(policy.value(None, x).value[0, 0])
    return action, log_prob, value
