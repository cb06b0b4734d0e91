"""Online (prior) trait tracker over causal history prefixes.

The prior sees what the acting principal can see: observations up to now,
mechanism actions and background responses strictly before now, never
rewards of the current step and never the future. Step s of the sequence
pairs obs_s with the action and responses of step s-1 (zeros at s=0), so
the belief after consuming step s conditions exactly on
(obs_{<=s}, actions_{<s}, responses_{<s}).

It trains against the posterior tracker's full-trajectory beliefs as soft
cross-entropy targets; targets are constants, no gradient reaches the
posterior.
"""

from __future__ import annotations

import numpy as np

from ..envs.base import Trajectory
from ..numerics import autodiff as ad
from ..numerics.autodiff import Node, Tape, constant
from ..numerics.stats import one_hot
from ..swm.trackers import TrackerDims, TraitTracker, tile_index_onehots

__all__ = [
    "PriorTracker",
    "prior_infer",
    "prior_tracker_loss",
    "build_prior_encodings",
    "build_prior_encodings_batch",
]


def build_prior_encodings(
    obs_list: list[np.ndarray],
    action_list: list[int],
    feats_list: list[np.ndarray],
    n_actions: int,
    n_agents: int,
    feat_dim: int,
) -> list[np.ndarray]:
    """Per-step causal inputs for one prefix: (n_agents, step_dim) each."""
    if obs_list and len(action_list) != len(obs_list) - 1:
        raise ValueError(
            f"{len(obs_list)} observations need {len(obs_list) - 1} previous "
            f"actions, got {len(action_list)}"
        )
    steps = []
    for s, obs in enumerate(obs_list):
        if s == 0:
            act = np.zeros(n_actions)
            feats = np.zeros((n_agents, feat_dim))
        else:
            act = one_hot(action_list[s - 1], n_actions).ravel()
            feats = feats_list[s - 1]
        base = np.concatenate([obs, act])
        steps.append(np.concatenate([np.tile(base, (n_agents, 1)), feats], axis=1))
    return steps


def build_prior_encodings_batch(trajs: list[Trajectory], n_actions: int) -> list[np.ndarray]:
    """Stacked causal inputs over a batch; includes the terminal observation."""
    T = len(trajs[0])
    if any(len(tr) != T for tr in trajs):
        raise ValueError("prior batch requires equal-length trajectories")
    n_agents = trajs[0].steps[0].agent_features.shape[0]
    feat_dim = trajs[0].steps[0].agent_features.shape[1]
    out = []
    for s in range(T + 1):
        rows = []
        for tr in trajs:
            obs = tr.steps[s].obs if s < T else tr.terminal_obs
            if s == 0:
                act = np.zeros(n_actions)
                feats = np.zeros((n_agents, feat_dim))
            else:
                prev = tr.steps[s - 1]
                act = one_hot(prev.action, n_actions).ravel()
                feats = prev.agent_features
            base = np.concatenate([obs, act])
            rows.append(np.concatenate([np.tile(base, (n_agents, 1)), feats], axis=1))
        out.append(np.concatenate(rows, axis=0))
    return out


class PriorTracker(TraitTracker):
    def __init__(self, dims: TrackerDims, rng: np.random.Generator):
        # no reward input, and no response heads: only the posterior decodes
        if dims.include_reward or dims.behavior_dim:
            dims = TrackerDims(**{**dims.__dict__, "include_reward": False, "behavior_dim": 0})
        super().__init__(dims, rng)

    def infer_prefix(
        self,
        obs_list: list[np.ndarray],
        action_list: list[int],
        feats_list: list[np.ndarray],
    ) -> np.ndarray:
        """(n_agents, K) belief after the given prefix; empty prefix allowed."""
        d = self.dims
        onehots = np.eye(d.n_agents)
        if not obs_list:
            logits = self.sequence_logits(None, [], onehots, outputs="all_with_empty")[0]
        else:
            steps = build_prior_encodings(
                obs_list, action_list, feats_list, d.n_actions, d.n_agents, d.feat_dim
            )
            logits = self.sequence_logits(None, steps, onehots, outputs="final")
        return ad.softmax_rows(None, logits).value

    def all_prefix_logits(self, trajs: list[Trajectory], tape: Tape | None) -> list[Node]:
        """One logits node per consumed observation (prefix lengths 1..T+1)."""
        steps = build_prior_encodings_batch(trajs, self.dims.n_actions)
        onehots = tile_index_onehots(len(trajs), self.dims.n_agents)
        return self.sequence_logits(tape, steps, onehots, outputs="all")


def prior_infer(tracker: PriorTracker, traj: Trajectory, prefix_len: int | None = None) -> np.ndarray:
    """Belief after ``prefix_len`` observations of a trajectory (default all)."""
    T = len(traj)
    obs_list = [s.obs for s in traj.steps] + [traj.terminal_obs]
    p = len(obs_list) if prefix_len is None else prefix_len
    return tracker.infer_prefix(
        obs_list[:p],
        [s.action for s in traj.steps[: max(0, p - 1)]],
        [s.agent_features for s in traj.steps[: max(0, p - 1)]],
    )


def prior_tracker_loss(
    tracker: PriorTracker,
    trajs: list[Trajectory],
    posterior_targets: np.ndarray,
    tape: Tape | None,
) -> tuple[Node, float]:
    """Soft cross-entropy to posterior beliefs, averaged over prefixes.

    ``posterior_targets`` is the (B*n_agents, K) posterior belief matrix,
    treated as constant. Per prefix the loss sums over agents; the total is
    the mean over the B trajectories and the T+1 prefix lengths.
    """
    logits_list = tracker.all_prefix_logits(trajs, tape)
    targets = constant(posterior_targets)
    acc = None
    for logits in logits_list:
        lsm = ad.log_softmax_rows(tape, logits)
        term = ad.sum_all(tape, ad.mul(tape, targets, lsm))
        acc = term if acc is None else ad.add(tape, acc, term)
    loss = ad.scale(tape, acc, -1.0 / (len(trajs) * len(logits_list)))
    return loss, loss.item()
