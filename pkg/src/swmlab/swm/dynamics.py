"""Trait-conditioned one-step dynamics and reward predictor.

A single MLP maps [observation | mechanism-action one-hot | flattened
belief rows] to [next-observation prediction | reward prediction]. Beliefs
enter as plain probability vectors, so a one-hot belief and a hard class
assignment are the same input. The state head is residual: the network
emits a correction added to the current observation, since most dimensions
carry over unchanged and squeezing a copy through the hidden layer wastes
capacity the changing dimensions need.
"""

from __future__ import annotations

import numpy as np

from ..numerics import autodiff as ad
from ..numerics.autodiff import Node, Tape, constant
from ..numerics.nets import init_mlp, mlp_forward
from ..numerics.params import ParameterStore
from ..numerics.stats import one_hot

__all__ = ["DynamicsModel", "dynamics_predict"]


class DynamicsModel:
    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        n_agents: int,
        n_traits: int,
        hidden: int,
        rng: np.random.Generator,
        n_hidden_layers: int = 2,
    ):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.n_agents = n_agents
        self.n_traits = n_traits
        self.in_dim = obs_dim + n_actions + n_agents * n_traits
        self.out_dim = obs_dim + 1
        self.n_layers = n_hidden_layers + 1
        self.store = ParameterStore()
        sizes = [self.in_dim] + [hidden] * n_hidden_layers + [self.out_dim]
        init_mlp(self.store, "dyn", sizes, rng)
        # zero the output layer: a fresh model predicts no change and zero reward
        self.store.value(f"dyn.w{self.n_layers - 1}")[:] = 0.0

    def forward(
        self, tape: Tape | None, obs: Node, action_onehot: Node, belief: Node
    ) -> tuple[Node, Node]:
        """Rows of (predicted next obs, predicted reward)."""
        x = ad.concat_cols(tape, [obs, action_onehot, belief])
        out = mlp_forward(tape, self.store, "dyn", x, self.n_layers)
        delta = ad.slice_cols(tape, out, 0, self.obs_dim)
        return (
            ad.add(tape, obs, delta),
            ad.slice_cols(tape, out, self.obs_dim, self.obs_dim + 1),
        )


def dynamics_predict(
    model: DynamicsModel, obs: np.ndarray, action: int, belief: np.ndarray
) -> tuple[np.ndarray, float]:
    """Single-transition convenience wrapper, no tape."""
    obs_n = constant(obs.reshape(1, -1))
    act_n = constant(one_hot(action, model.n_actions))
    belief_n = constant(np.asarray(belief).reshape(1, -1))
    pred_obs, pred_r = model.forward(None, obs_n, act_n, belief_n)
    return pred_obs.value.ravel().copy(), float(pred_r.value[0, 0])
