"""Trait-recovery diagnostics against the environments' hidden ground truth.

Learners never see traits; this module reads them through the privileged
``traits_of`` accessor purely for measurement. Because trait classes are
discovered without labels, class identities are only defined up to a
permutation, so accuracy is reported both raw and after the best label
alignment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ..envs.base import principal_episode

__all__ = ["ConfusionMatrix", "trait_confusion", "random_valid_policy"]


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K): rows true class, cols predicted class

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy_raw(self) -> float:
        return float(np.trace(self.counts)) / max(self.total, 1)

    def accuracy_aligned(self) -> float:
        """Best accuracy over relabelings of the predicted classes."""
        k = self.counts.shape[0]
        best = 0.0
        for perm in permutations(range(k)):
            hit = sum(self.counts[i, perm[i]] for i in range(k))
            best = max(best, float(hit))
        return best / max(self.total, 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "counts": self.counts.astype(int).tolist(),
                "accuracy_raw": self.accuracy_raw(),
                "accuracy_aligned": self.accuracy_aligned(),
            },
            sort_keys=True,
        )


def random_valid_policy(env, rng: np.random.Generator):
    """Uniform sampling over currently valid mechanism actions."""

    def policy(obs, history):
        valid = np.flatnonzero(env.action_mask())
        return int(valid[rng.integers(valid.shape[0])])

    return policy


def trait_confusion(
    tracker,
    env,
    n_episodes: int,
    rng: np.random.Generator,
    use_prefix: int | None = None,
    policy=None,
    trajectories=None,
) -> ConfusionMatrix:
    """Argmax-belief vs true-trait counts over episodes.

    With ``use_prefix`` the tracker is treated as a prior tracker evaluated
    after that many observations; otherwise it is a posterior tracker on
    the full trajectory. Pass ``trajectories`` to reuse existing episodes
    instead of rolling fresh ones.
    """
    from ..policy.tracker import prior_infer

    k = tracker.dims.n_traits
    counts = np.zeros((k, k), dtype=np.int64)
    if trajectories is None:
        trajectories = []
        for _ in range(n_episodes):
            pol = policy or random_valid_policy(env, rng)
            trajectories.append(principal_episode(env, pol, rng))
    for traj in trajectories:
        if use_prefix is None:
            belief = tracker.infer(traj)
        else:
            belief = prior_infer(tracker, traj, prefix_len=use_prefix)
        pred = np.argmax(belief, axis=1)
        for true_m, p in zip(traj.traits, pred):
            counts[int(true_m), int(p)] += 1
    return ConfusionMatrix(counts)
