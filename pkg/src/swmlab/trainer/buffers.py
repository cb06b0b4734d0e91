"""Replay buffers for real and imagined experience."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..envs.base import Trajectory, trajectory_to_record
from ..swm.rollout import ImaginedRollout

__all__ = ["EnvBuffer", "ModelBuffer"]


class EnvBuffer:
    """FIFO ring of real trajectories (D_env)."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[Trajectory] = []
        self.n_inserted = 0

    def extend(self, trajs) -> None:
        for tr in trajs:
            self.items.append(tr)
            self.n_inserted += 1
        if len(self.items) > self.capacity:
            self.items = self.items[-self.capacity :]

    def recent(self, k: int) -> list[Trajectory]:
        return self.items[-k:]

    def sample_branch_points(
        self, rng: np.random.Generator, k: int
    ) -> list[tuple[Trajectory, int]]:
        """(trajectory, step index) pairs drawn uniformly with replacement."""
        out = []
        for _ in range(k):
            tr = self.items[int(rng.integers(len(self.items)))]
            out.append((tr, int(rng.integers(len(tr)))))
        return out

    def __len__(self) -> int:
        return len(self.items)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for tr in self.items:
            h.update(json.dumps(trajectory_to_record(tr), sort_keys=True).encode())
        return h.hexdigest()


class ModelBuffer:
    """FIFO ring of imagined rollouts (D_model) with staleness eviction."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[ImaginedRollout] = []
        self.n_inserted = 0

    def extend(self, rollouts) -> None:
        for r in rollouts:
            self.items.append(r)
            self.n_inserted += 1
        if len(self.items) > self.capacity:
            self.items = self.items[-self.capacity :]

    def evict_stale(self, current_swm_epoch: int) -> None:
        """Keep only rollouts imagined by the current or previous SWM."""
        self.items = [r for r in self.items if r.swm_epoch >= current_swm_epoch - 1]

    def from_epoch(self, swm_epoch: int) -> list[ImaginedRollout]:
        return [r for r in self.items if r.swm_epoch == swm_epoch]

    def __len__(self) -> int:
        return len(self.items)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for r in self.items:
            h.update(str(r.swm_epoch).encode())
            h.update(np.float64(r.bootstrap_value).tobytes())
            for s in r.steps:
                h.update(s.obs.tobytes())
                h.update(np.int64(s.action).tobytes())
                h.update(np.float64(s.reward).tobytes())
        return h.hexdigest()
