"""Trait trackers: sequence encoders that map histories to per-agent beliefs.

One tracker processes each agent as its own stream with fully shared
weights: a step-encoder MLP feeds an LSTM, and a head MLP reads the hidden
state concatenated with the agent's index one-hot. Sharing weights across
streams makes belief rows permutation-equivariant in the agent axis by
construction, which is also how the property is tested.

The posterior variant consumes full trajectories including rewards; the
prior variant (see policy.tracker) consumes the causal prefix layout where
the observation at t arrives together with the *previous* action and
responses. Both share this module's machinery.

Head output layers start at zero so a fresh tracker emits exactly uniform
beliefs everywhere, including the empty prefix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs.base import Trajectory
from ..numerics import autodiff as ad
from ..numerics.autodiff import Node, Tape, constant
from ..numerics.nets import init_lstm, init_mlp, lstm_step, mlp_forward
from ..numerics.params import ParameterStore, glorot_uniform
from ..numerics.stats import one_hot

__all__ = [
    "TrackerDims",
    "TraitTracker",
    "PosteriorTracker",
    "build_posterior_encodings",
    "tile_index_onehots",
]


@dataclass(frozen=True)
class TrackerDims:
    obs_dim: int
    n_actions: int
    n_agents: int
    feat_dim: int
    n_traits: int
    enc_hidden: int = 64
    lstm_hidden: int = 64
    head_hidden: int = 64
    include_reward: bool = True
    # leading response-feature dims that are behavior (0 = no response heads)
    behavior_dim: int = 0
    # behavioral dims after the first only count when the first is 1
    gated: bool = False
    resp_hidden: int = 32

    @property
    def step_dim(self) -> int:
        return self.obs_dim + self.n_actions + self.feat_dim + (1 if self.include_reward else 0)

    @property
    def resp_ctx_dim(self) -> int:
        # trait-free trailing feature dims plus the step-fraction column
        return self.feat_dim - self.behavior_dim + 1


class TraitTracker:
    """Shared-weight per-agent sequence encoder with softmax belief heads."""

    def __init__(self, dims: TrackerDims, rng: np.random.Generator):
        self.dims = dims
        self.store = ParameterStore()
        init_mlp(self.store, "enc", [dims.step_dim, dims.enc_hidden, dims.enc_hidden], rng)
        init_lstm(self.store, "lstm", dims.enc_hidden, dims.lstm_hidden, rng)
        init_mlp(
            self.store,
            "head",
            [dims.lstm_hidden + dims.n_agents, dims.head_hidden, dims.n_traits],
            rng,
        )
        # zero the head output layer: fresh beliefs are exactly uniform
        self.store.value("head.w1")[:] = 0.0

    def _head(self, tape: Tape | None, h: Node, onehots: Node) -> Node:
        head_in = ad.concat_cols(tape, [h, onehots])
        return mlp_forward(tape, self.store, "head", head_in, 2)

    def sequence_logits(
        self,
        tape: Tape | None,
        step_inputs: list[np.ndarray],
        index_onehots: np.ndarray,
        outputs: str = "final",
    ) -> Node | list[Node]:
        """Run the encoder+LSTM over step inputs; return belief logits.

        ``step_inputs`` is a list of (rows, step_dim) arrays, one per time
        step, rows being (trajectory, agent) streams. ``outputs``:
        "final" → logits after the last step; "all" → one logits node per
        consumed step; "all_with_empty" → additionally the zero-history
        logits in front.
        """
        rows = index_onehots.shape[0]
        onehots = constant(index_onehots)
        h = constant(np.zeros((rows, self.dims.lstm_hidden)))
        c = constant(np.zeros((rows, self.dims.lstm_hidden)))
        collected: list[Node] = []
        if outputs == "all_with_empty":
            collected.append(self._head(tape, h, onehots))
        for x in step_inputs:
            enc = ad.tanh(tape, mlp_forward(tape, self.store, "enc", constant(x), 2))
            h, c = lstm_step(tape, self.store, "lstm", enc, h, c)
            if outputs != "final":
                collected.append(self._head(tape, h, onehots))
        if outputs == "final":
            return self._head(tape, h, onehots)
        return collected


def tile_index_onehots(n_trajs: int, n_agents: int) -> np.ndarray:
    """(n_trajs*n_agents, n_agents) identity blocks, agent-major within traj."""
    return np.tile(np.eye(n_agents), (n_trajs, 1))


def build_posterior_encodings(trajs: list[Trajectory], n_actions: int) -> list[np.ndarray]:
    """Per-step tracker inputs for a batch of equal-length trajectories.

    Step t yields a (B*n_agents, step_dim) array: row b*n_agents+i carries
    [obs_t | action one-hot | agent i's response features | reward].
    """
    T = len(trajs[0])
    if any(len(tr) != T for tr in trajs):
        raise ValueError("posterior batch requires equal-length trajectories")
    n_agents = trajs[0].steps[0].agent_features.shape[0]
    out = []
    for t in range(T):
        rows = []
        for tr in trajs:
            s = tr.steps[t]
            base = np.concatenate([s.obs, one_hot(s.action, n_actions).ravel()])
            block = np.concatenate(
                [
                    np.tile(base, (n_agents, 1)),
                    s.agent_features,
                    np.full((n_agents, 1), s.reward),
                ],
                axis=1,
            )
            rows.append(block)
        out.append(np.concatenate(rows, axis=0))
    return out


class PosteriorTracker(TraitTracker):
    """Belief from the full trajectory, responses and rewards included.

    When ``dims.behavior_dim`` is set it also owns per-class response heads:
    a small decoder predicting each agent's behavioral feature dims from the
    trait-free context dims. The world-model loss weights the per-class
    reconstruction errors by the belief, which is what gives the belief
    heads a gradient that actually separates the classes.
    """

    def __init__(self, dims: TrackerDims, rng: np.random.Generator):
        super().__init__(dims, rng)
        if dims.behavior_dim > 0:
            init_mlp(self.store, "resp", [dims.resp_ctx_dim, dims.resp_hidden], rng)
            for k in range(dims.n_traits):
                self.store.add(
                    f"resp.head{k}.w",
                    glorot_uniform(rng, dims.resp_hidden, dims.behavior_dim),
                )
                self.store.add(f"resp.head{k}.b", np.zeros((1, dims.behavior_dim)))

    @property
    def has_response_model(self) -> bool:
        return self.dims.behavior_dim > 0

    def response_class_means(self, tape: Tape | None, ctx: Node) -> list[Node]:
        """Per-class predicted behavior rows given trait-free context rows."""
        h = ad.tanh(tape, mlp_forward(tape, self.store, "resp", ctx, 1))
        return [
            ad.add(
                tape,
                ad.matmul(tape, h, self.store.node(f"resp.head{k}.w")),
                self.store.node(f"resp.head{k}.b"),
            )
            for k in range(self.dims.n_traits)
        ]

    def logits_batch(self, trajs: list[Trajectory], tape: Tape | None) -> Node:
        steps = build_posterior_encodings(trajs, self.dims.n_actions)
        onehots = tile_index_onehots(len(trajs), self.dims.n_agents)
        return self.sequence_logits(tape, steps, onehots, outputs="final")

    def infer(self, traj: Trajectory) -> np.ndarray:
        """(n_agents, n_traits) belief rows; pure forward pass."""
        logits = self.logits_batch([traj], None)
        return ad.softmax_rows(None, logits).value

    def infer_batch(self, trajs: list[Trajectory]) -> np.ndarray:
        logits = self.logits_batch(trajs, None)
        return ad.softmax_rows(None, logits).value
