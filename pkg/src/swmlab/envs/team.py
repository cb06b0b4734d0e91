"""Team-production game with typed, rule-based workers.

Four resource corners hold finite stocks; each agent's hidden type fixes
which resource it can store (type k stores type (k+1) mod n_types) and it
only works when a teammate of that producer type is on its team. The
principal reassigns the team partition every ``decision_period`` steps
starting at ``first_decision_step``. Rewards: +basic_value per stored unit,
conversions of complementary pairs into advanced goods net
advanced_value - 2*basic_value, and every agent pays
maintenance_coeff*(team size - 1) per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._kernels import team_advance
from ..exceptions import ConfigurationError, ContractViolation
from .partitions import enumerate_partitions

__all__ = [
    "TeamConfig",
    "TeamState",
    "decision_steps",
    "team_reset",
    "team_agent_step",
    "team_step",
]

# Corner of resource type r, clockwise from the origin.
_CORNERS = ((0, 0), (0, -1), (-1, 0), (-1, -1))

# Complementary basic types that convert into one advanced unit.
_CONVERSION_PAIRS = ((0, 1), (2, 3))


@dataclass(frozen=True)
class TeamConfig:
    grid_side: int = 8
    n_agents: int = 4
    n_types: int = 4
    resource_stock: int = 10
    basic_value: float = 1.0
    advanced_value: float = 5.0
    maintenance_coeff: float = 0.05
    decision_period: int = 10
    first_decision_step: int = 5
    episode_length: int = 50

    def validate(self) -> None:
        if self.grid_side < 3:
            raise ConfigurationError(f"grid_side must be >= 3, got {self.grid_side}")
        if self.n_agents < 1:
            raise ConfigurationError(f"n_agents must be >= 1, got {self.n_agents}")
        if not 2 <= self.n_types <= 4:
            raise ConfigurationError(f"n_types must be in [2, 4], got {self.n_types}")
        if self.resource_stock < 0:
            raise ConfigurationError("resource_stock must be >= 0")
        if self.decision_period < 1 or self.first_decision_step < 0:
            raise ConfigurationError("decision schedule must be positive")
        if self.first_decision_step >= self.episode_length:
            raise ConfigurationError("first decision falls outside the episode")

    def corners(self) -> np.ndarray:
        g = self.grid_side
        return np.array(
            [(r % g, c % g) for r, c in _CORNERS[: self.n_types]], dtype=np.int64
        )

    def conversion_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(p for p in _CONVERSION_PAIRS if max(p) < self.n_types)


def decision_steps(config: TeamConfig) -> tuple[int, ...]:
    return tuple(
        range(config.first_decision_step, config.episode_length, config.decision_period)
    )


@dataclass
class TeamState:
    config: TeamConfig
    agent_positions: np.ndarray  # (n_agents, 2) int64
    types: np.ndarray  # (n_agents,) int64, hidden traits
    partition: tuple[int, ...]  # restricted growth string over agents
    stocks: np.ndarray  # (n_types,) int64 remaining per corner
    tallies: np.ndarray  # (n_agents, n_types) int64 stored basics per team
    t: int = 0
    last_stored: np.ndarray | None = None  # per-agent store flags from last tick

    def __post_init__(self):
        if self.last_stored is None:
            self.last_stored = np.zeros(self.config.n_agents, dtype=bool)

    def team_sizes(self) -> np.ndarray:
        """Size of each agent's own team, per agent."""
        ids = np.asarray(self.partition)
        counts = np.bincount(ids, minlength=len(ids))
        return counts[ids]


def team_reset(config: TeamConfig, rng: np.random.Generator) -> TeamState:
    """Uniform types; uniform positions over non-corner cells; singletons."""
    config.validate()
    g = config.grid_side
    corner_cells = {r * g + c for r, c in config.corners()}
    free_cells = np.array(
        [cell for cell in range(g * g) if cell not in corner_cells], dtype=np.int64
    )
    cells = rng.choice(free_cells, size=config.n_agents, replace=True)
    positions = np.stack([cells // g, cells % g], axis=1).astype(np.int64)
    types = rng.integers(0, config.n_types, size=config.n_agents).astype(np.int64)
    return TeamState(
        config=config,
        agent_positions=positions,
        types=types,
        partition=tuple(range(config.n_agents)),
        stocks=np.full(config.n_types, config.resource_stock, dtype=np.int64),
        tallies=np.zeros((config.n_agents, config.n_types), dtype=np.int64),
    )


def _advance(state: TeamState, first: int, last: int) -> tuple[np.ndarray, np.ndarray]:
    cfg = state.config
    corners = cfg.corners()
    storable = (state.types + 1) % cfg.n_types
    return team_advance(
        state.agent_positions[:, 0],
        state.agent_positions[:, 1],
        state.types,
        np.array(state.partition, dtype=np.int64),
        storable,
        np.ascontiguousarray(corners[:, 0]),
        np.ascontiguousarray(corners[:, 1]),
        state.stocks,
        state.tallies,
        first,
        last,
    )


def team_agent_step(state: TeamState, agent: int) -> tuple[bool, bool]:
    """Apply the movement/storage rule to one agent, mutating the state.

    Returns (moved, stored). Exposed for rule-level tests; team_step drives
    all agents in index order through the same kernel.
    """
    moved, stored = _advance(state, agent, agent + 1)
    return bool(moved[agent]), bool(stored[agent])


def team_step(
    state: TeamState, action: int | None, rng: np.random.Generator
) -> tuple[TeamState, float]:
    """One environment tick; ``action`` is a partition index on schedule only.

    Repartitioning clears all team tallies: unconverted holdings belong to
    the dissolved teams and do not carry over.
    """
    cfg = state.config
    on_schedule = state.t in decision_steps(cfg)
    if on_schedule and action is None:
        raise ContractViolation(f"step {state.t} is a decision step but no partition given")
    if not on_schedule and action is not None:
        raise ContractViolation(f"partition supplied off-schedule at step {state.t}")

    next_state = TeamState(
        config=cfg,
        agent_positions=state.agent_positions.copy(),
        types=state.types,
        partition=state.partition,
        stocks=state.stocks.copy(),
        tallies=state.tallies.copy(),
        t=state.t + 1,
    )
    if action is not None:
        parts = enumerate_partitions(cfg.n_agents)
        if not 0 <= action < len(parts):
            raise ContractViolation(f"partition index {action} out of range [0, {len(parts)})")
        next_state.partition = parts[action]
        next_state.tallies[:] = 0

    _, stored = _advance(next_state, 0, cfg.n_agents)
    next_state.last_stored = stored
    reward = cfg.basic_value * float(stored.sum())

    conversion_gain = cfg.advanced_value - 2.0 * cfg.basic_value
    for pair in cfg.conversion_pairs():
        a, b = pair
        for team in range(cfg.n_agents):
            k = int(min(next_state.tallies[team, a], next_state.tallies[team, b]))
            if k > 0:
                next_state.tallies[team, a] -= k
                next_state.tallies[team, b] -= k
                reward += conversion_gain * k

    sizes = next_state.team_sizes()
    reward -= cfg.maintenance_coeff * float((sizes - 1).sum())
    return next_state, float(reward)
