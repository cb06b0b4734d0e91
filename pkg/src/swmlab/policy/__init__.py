"""Mechanism policy: online trait inference, masked action head, PPO."""

from .network import PolicyNetwork, policy_act
from .ppo import PpoBatch, build_ppo_batch, compute_gae, ppo_update
from .tracker import PriorTracker, prior_infer, prior_tracker_loss

__all__ = [
    "PriorTracker",
    "prior_infer",
    "prior_tracker_loss",
    "PolicyNetwork",
    "policy_act",
    "PpoBatch",
    "build_ppo_batch",
    "compute_gae",
    "ppo_update",
]
