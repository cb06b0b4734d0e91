"""Mechanism-design environments with scripted, trait-driven participants."""

from .base import FacilityEnv, TeamEnv, TrajStep, Trajectory, make_env, principal_episode
from .facility import FacilityConfig, FacilityState, TraitClass
from .partitions import bell_number, enumerate_partitions
from .team import TeamConfig, TeamState

__all__ = [
    "FacilityConfig",
    "FacilityState",
    "TraitClass",
    "TeamConfig",
    "TeamState",
    "FacilityEnv",
    "TeamEnv",
    "TrajStep",
    "Trajectory",
    "make_env",
    "principal_episode",
    "bell_number",
    "enumerate_partitions",
]
