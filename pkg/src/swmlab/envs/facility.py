"""Facility-location game with trait-driven logit choice.

The principal places one facility per step on a grid. Each background agent
then independently picks one placed facility or stays home, via a softmax
over utilities u = bias - w_dist * manhattan/grid_side - w_cong * congestion,
where the weights depend on the agent's hidden trait class. Social reward is
the number of agents who visit anything.

Includes exact-expectation and brute-force placement oracles used for
verification; both share the same choice model as the sampled step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .._kernels import facility_choice_probs, inverse_cdf_rows
from ..exceptions import ConfigurationError, InstanceTooLargeError, InvalidActionError

__all__ = [
    "TraitClass",
    "FacilityConfig",
    "FacilityState",
    "facility_reset",
    "nearest_assignment",
    "facility_agent_choice_probs",
    "facility_step",
    "facility_expected_reward",
    "oracle_best_placement",
]


@dataclass(frozen=True)
class TraitClass:
    """Choice-utility weights for one hidden agent class."""

    w_dist: float
    w_cong: float
    bias: float


# Defaults: class 0 cares about distance, class 1 about crowding.
_DEFAULT_TRAITS = (
    TraitClass(w_dist=4.0, w_cong=0.0, bias=1.0),
    TraitClass(w_dist=1.0, w_cong=8.0, bias=1.0),
)


@dataclass(frozen=True)
class FacilityConfig:
    grid_side: int = 8
    n_agents: int = 8
    n_facilities: int = 5
    n_trait_classes: int = 2
    trait_params: tuple[TraitClass, ...] = _DEFAULT_TRAITS

    def validate(self) -> None:
        if self.grid_side < 1:
            raise ConfigurationError(f"grid_side must be >= 1, got {self.grid_side}")
        if self.n_agents < 0:
            raise ConfigurationError(f"n_agents must be >= 0, got {self.n_agents}")
        if not 1 <= self.n_facilities <= self.grid_side ** 2:
            raise ConfigurationError(
                f"n_facilities must be in [1, {self.grid_side ** 2}], got {self.n_facilities}"
            )
        if self.n_trait_classes < 1:
            raise ConfigurationError(f"need at least 1 trait class, got {self.n_trait_classes}")
        if len(self.trait_params) != self.n_trait_classes:
            raise ConfigurationError(
                f"trait_params has {len(self.trait_params)} entries, expected {self.n_trait_classes}"
            )
        for i, tc in enumerate(self.trait_params):
            if tc.w_dist < 0 or tc.w_cong < 0:
                raise ConfigurationError(f"trait class {i}: weights must be >= 0")

    def _weight_arrays(self):
        w_dist = np.array([tc.w_dist for tc in self.trait_params])
        w_cong = np.array([tc.w_cong for tc in self.trait_params])
        bias = np.array([tc.bias for tc in self.trait_params])
        return w_dist, w_cong, bias


@dataclass
class FacilityState:
    """Positions and traits are fixed per episode; facilities accumulate."""

    config: FacilityConfig
    agent_positions: np.ndarray  # (n_agents, 2) int64, fixed per episode
    traits: np.ndarray  # (n_agents,) int64, never observed
    placed_facilities: list[tuple[int, int]] = field(default_factory=list)
    last_visits: np.ndarray | None = None  # (grid_side**2,) visit counts from last step
    t: int = 0

    def __post_init__(self):
        if self.last_visits is None:
            self.last_visits = np.zeros(self.config.grid_side ** 2)

    def occupied_cells(self) -> set[int]:
        g = self.config.grid_side
        return {r * g + c for r, c in self.placed_facilities}


def facility_reset(config: FacilityConfig, rng: np.random.Generator) -> FacilityState:
    """Fresh episode: uniform positions (collisions allowed), uniform traits."""
    config.validate()
    g = config.grid_side
    positions = np.stack(
        [
            rng.integers(0, g, size=config.n_agents),
            rng.integers(0, g, size=config.n_agents),
        ],
        axis=1,
    ).astype(np.int64)
    traits = rng.integers(0, config.n_trait_classes, size=config.n_agents).astype(np.int64)
    return FacilityState(config=config, agent_positions=positions, traits=traits)


def _placement_arrays(state: FacilityState, placements=None):
    pl = state.placed_facilities if placements is None else list(placements)
    g = state.config.grid_side
    pr = np.array([p[0] for p in pl], dtype=np.int64)
    pc = np.array([p[1] for p in pl], dtype=np.int64)
    cell = pr * g + pc
    return pr, pc, cell


def nearest_assignment(positions: np.ndarray, placed, grid_side: int):
    """Per-agent nearest placed facility and the resulting visitor counts.

    Same convention the choice kernel uses for congestion: Manhattan
    distance, ties to the lowest cell index. Returns (dists, nearest,
    counts) with dists of shape (n_agents, F). ``placed`` must be non-empty.
    """
    pr = np.array([p[0] for p in placed], dtype=np.int64)
    pc = np.array([p[1] for p in placed], dtype=np.int64)
    cell = pr * grid_side + pc
    dists = np.abs(positions[:, :1] - pr) + np.abs(positions[:, 1:] - pc)
    # lexicographic (distance, cell index) argmin; cell < grid_side**2
    nearest = np.argmin(dists * grid_side * grid_side + cell, axis=1)
    counts = np.bincount(nearest, minlength=len(placed))
    return dists, nearest, counts


def _all_choice_probs(state: FacilityState, placements=None) -> np.ndarray:
    """(n_agents, F+1) rows; the trailing column is stay-home."""
    cfg = state.config
    pr, pc, cell = _placement_arrays(state, placements)
    w_dist, w_cong, bias = cfg._weight_arrays()
    return facility_choice_probs(
        np.ascontiguousarray(state.agent_positions[:, 0]),
        np.ascontiguousarray(state.agent_positions[:, 1]),
        state.traits,
        pr,
        pc,
        cell,
        w_dist,
        w_cong,
        bias,
        cfg.grid_side,
    )


def facility_agent_choice_probs(state: FacilityState, agent: int) -> np.ndarray:
    """Choice distribution of one agent over placed facilities + stay-home."""
    if not state.placed_facilities:
        return np.array([1.0])
    return _all_choice_probs(state)[agent]


def facility_step(
    state: FacilityState, action: int, rng: np.random.Generator
) -> tuple[FacilityState, float, np.ndarray]:
    """Place facility at cell ``action``; agents respond; returns visits count."""
    g = state.config.grid_side
    if not 0 <= action < g * g:
        raise InvalidActionError(f"cell {action} outside grid of side {g}")
    if action in state.occupied_cells():
        raise InvalidActionError(f"cell {action} already holds a facility")

    placed = state.placed_facilities + [(action // g, action % g)]
    next_state = FacilityState(
        config=state.config,
        agent_positions=state.agent_positions,
        traits=state.traits,
        placed_facilities=placed,
        t=state.t + 1,
    )
    n = state.config.n_agents
    if n == 0:
        return next_state, 0.0, np.zeros(0, dtype=np.int64)

    probs = _all_choice_probs(next_state)
    choices = inverse_cdf_rows(probs, rng.random(n))
    stay = len(placed)  # stay-home column index
    visits = np.zeros(g * g)
    for i in range(n):
        if choices[i] != stay:
            r, c = placed[choices[i]]
            visits[r * g + c] += 1.0
    next_state.last_visits = visits
    r_soc = float(np.count_nonzero(choices != stay))
    return next_state, r_soc, choices


def facility_expected_reward(state: FacilityState, placements) -> float:
    """Exact expected visitors with the given placement set present."""
    placements = list(placements)
    if not placements:
        return 0.0
    if len(set(placements)) != len(placements):
        raise InvalidActionError(f"placements contain duplicates: {placements}")
    g = state.config.grid_side
    for r, c in placements:
        if not (0 <= r < g and 0 <= c < g):
            raise InvalidActionError(f"placement ({r}, {c}) outside grid of side {g}")
    if state.config.n_agents == 0:
        return 0.0
    probs = _all_choice_probs(state, placements)
    return float((1.0 - probs[:, -1]).sum())


def oracle_best_placement(
    config: FacilityConfig, state: FacilityState
) -> tuple[tuple[tuple[int, int], ...], float]:
    """Exhaustive search over all placement sets of size n_facilities.

    Ties go to the lexicographically smallest set of cell indices, which is
    the enumeration order of itertools.combinations.
    """
    g = config.grid_side
    n_cells = g * g
    if comb(n_cells, config.n_facilities) > 10 ** 6:
        raise InstanceTooLargeError(
            f"C({n_cells}, {config.n_facilities}) placement sets exceed 10^6"
        )
    best_set: tuple[tuple[int, int], ...] = ()
    best_val = -np.inf
    for cells in combinations(range(n_cells), config.n_facilities):
        placements = tuple((cell // g, cell % g) for cell in cells)
        val = facility_expected_reward(state, placements)
        if val > best_val + 1e-12:
            best_val = val
            best_set = placements
    return best_set, float(best_val)
