"""Principal-level interface shared by both environments.

Adapters expose the mechanism MDP: flat observations, a discrete mechanism
action space with validity masks, and one ``decision_step`` per principal
decision (for the team game this spans a full window of environment ticks).
Observations never encode traits; trait arrays are reachable only through
``traits_of`` for tracker training targets and diagnostics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigurationError
from . import facility as fac
from . import team as tm
from .partitions import enumerate_partitions

__all__ = [
    "TrajStep",
    "Trajectory",
    "FacilityEnv",
    "TeamEnv",
    "make_env",
    "principal_episode",
    "trajectory_to_record",
    "trajectory_from_record",
    "write_jsonl",
    "read_jsonl",
]


@dataclass
class TrajStep:
    obs: np.ndarray  # observation the decision was taken in
    action: int  # mechanism action
    agent_actions: np.ndarray  # background responses, env-specific encoding
    agent_features: np.ndarray  # (n_agents, feature_dim) tracker inputs
    reward: float


@dataclass
class Trajectory:
    steps: list[TrajStep]
    terminal_obs: np.ndarray
    traits: np.ndarray
    pre_reward: float = 0.0
    config_hash: str = ""
    seed: int = 0

    @property
    def total_reward(self) -> float:
        return self.pre_reward + sum(s.reward for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


class FacilityEnv:
    """One principal decision = one facility placement."""

    name = "facility"

    def __init__(self, config: fac.FacilityConfig):
        config.validate()
        self.config = config
        g = config.grid_side
        n = config.n_agents
        self.n_agents = n
        self.n_traits = config.n_trait_classes
        self.n_actions = g * g
        self.episode_decisions = config.n_facilities
        # response row = 4 behavioral dims, then 2 trait-free context dims
        self.agent_feature_dim = 6
        self.feat_behavior_dim = 4
        self.feat_gated = True
        # obs = positions | occupancy | last-step visit counts | step index
        self.pos_slice = slice(0, 2 * n)
        self.occ_slice = slice(2 * n, 2 * n + g * g)
        self.visits_slice = slice(2 * n + g * g, 2 * n + 2 * g * g)
        self.obs_dim = 2 * n + 2 * g * g + 1
        self.state: fac.FacilityState | None = None

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = fac.facility_reset(self.config, rng)
        return self.encode_obs(self.state)

    def encode_obs(self, state: fac.FacilityState) -> np.ndarray:
        cfg = self.config
        g = cfg.grid_side
        denom = max(1, g - 1)
        occ = np.zeros(g * g)
        for r, c in state.placed_facilities:
            occ[r * g + c] = 1.0
        return np.concatenate(
            [
                state.agent_positions.astype(np.float64).ravel() / denom,
                occ,
                state.last_visits / max(1, cfg.n_agents),
                [state.t / cfg.n_facilities],
            ]
        )

    def action_mask(self) -> np.ndarray:
        mask = np.ones(self.n_actions, dtype=bool)
        for cell in self.state.occupied_cells():
            mask[cell] = False
        return mask

    def mask_from_obs(self, obs: np.ndarray) -> np.ndarray:
        """Validity mask recovered from an observation (real or imagined)."""
        mask = obs[self.occ_slice] < 0.5
        if not mask.any():
            return np.ones(self.n_actions, dtype=bool)
        return mask

    def run_pre_phase(self, rng: np.random.Generator) -> tuple[float, np.ndarray]:
        return 0.0, self.encode_obs(self.state)

    def decision_step(
        self, action: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
        self.state, r_soc, choices = fac.facility_step(self.state, int(action), rng)
        feats = self._choice_features(choices, self.state.placed_facilities, self.state.agent_positions)
        return self.encode_obs(self.state), r_soc, choices, feats

    def _choice_features(self, choices: np.ndarray, placed, positions: np.ndarray) -> np.ndarray:
        """Per-agent response row:

            (visited, dist of choice, congestion at choice, chose nearest |
             dist to nearest, congestion at nearest)

        distances / grid_side, congestion excluding the agent itself, the
        same conventions the agents' own utilities use. Dims 1-3 are zero
        for a stay-home row; everything is zero with nothing placed.
        """
        g = self.config.grid_side
        n = self.n_agents
        feats = np.zeros((n, self.agent_feature_dim))
        if not placed or n == 0:
            return feats
        dists, nearest, counts = fac.nearest_assignment(positions, placed, g)
        for i in range(n):
            ni = nearest[i]
            feats[i, 4] = dists[i, ni] / g
            feats[i, 5] = (counts[ni] - 1) / n
            a = choices[i]
            if a < len(placed):
                feats[i, 0] = 1.0
                feats[i, 1] = dists[i, a] / g
                feats[i, 2] = (counts[a] - (1 if ni == a else 0)) / n
                feats[i, 3] = 1.0 if a == ni else 0.0
        return feats

    def features_for_recorded_step(
        self, step_index: int, actions_so_far: list[int], agent_actions: np.ndarray, obs: np.ndarray
    ) -> np.ndarray:
        g = self.config.grid_side
        placed = [(a // g, a % g) for a in actions_so_far]
        denom = max(1, g - 1)
        positions = np.rint(np.asarray(obs[self.pos_slice]) * denom).astype(np.int64).reshape(-1, 2)
        return self._choice_features(agent_actions, placed, positions)

    @property
    def done(self) -> bool:
        return self.state.t >= self.config.n_facilities

    def traits_of(self) -> np.ndarray:
        return self.state.traits.copy()


class TeamEnv:
    """One principal decision = a repartition plus its window of ticks."""

    name = "team"

    def __init__(self, config: tm.TeamConfig):
        config.validate()
        self.config = config
        n = config.n_agents
        self.n_agents = n
        self.n_traits = config.n_types
        self.partitions = enumerate_partitions(n)
        self.n_actions = len(self.partitions)
        self.decision_schedule = tm.decision_steps(config)
        self.episode_decisions = len(self.decision_schedule)
        self.agent_feature_dim = 1
        self.feat_behavior_dim = 1
        self.feat_gated = False
        self.obs_dim = 2 * n + config.n_types + self.n_actions + n * config.n_types + 1
        self.state: tm.TeamState | None = None

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.state = tm.team_reset(self.config, rng)
        return self.encode_obs(self.state)

    def encode_obs(self, state: tm.TeamState) -> np.ndarray:
        cfg = self.config
        denom = max(1, cfg.grid_side - 1)
        part_onehot = np.zeros(self.n_actions)
        part_onehot[self.partitions.index(state.partition)] = 1.0
        stock_denom = max(1, cfg.resource_stock)
        return np.concatenate(
            [
                state.agent_positions.astype(np.float64).ravel() / denom,
                state.stocks / stock_denom,
                part_onehot,
                state.tallies.ravel() / stock_denom,
                [state.t / cfg.episode_length],
            ]
        )

    def action_mask(self) -> np.ndarray:
        return np.ones(self.n_actions, dtype=bool)

    def mask_from_obs(self, obs: np.ndarray) -> np.ndarray:
        return np.ones(self.n_actions, dtype=bool)

    def run_pre_phase(self, rng: np.random.Generator) -> tuple[float, np.ndarray]:
        """Ticks before the first decision, under the initial partition."""
        total = 0.0
        while self.state.t < self.decision_schedule[0]:
            self.state, r = tm.team_step(self.state, None, rng)
            total += r
        return total, self.encode_obs(self.state)

    def decision_step(
        self, action: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
        cfg = self.config
        t0 = self.state.t
        later = [s for s in self.decision_schedule if s > t0]
        t_end = later[0] if later else cfg.episode_length
        self.state, reward = tm.team_step(self.state, int(action), rng)
        stores = self.state.last_stored.astype(np.int64).copy()
        while self.state.t < t_end:
            self.state, r = tm.team_step(self.state, None, rng)
            stores += self.state.last_stored
            reward += r
        feats = (stores / cfg.decision_period).reshape(-1, 1)
        return self.encode_obs(self.state), reward, stores, feats

    def features_for_recorded_step(
        self, step_index: int, actions_so_far: list[int], agent_actions: np.ndarray, obs: np.ndarray
    ) -> np.ndarray:
        return (agent_actions / self.config.decision_period).reshape(-1, 1)

    @property
    def done(self) -> bool:
        return self.state.t >= self.config.episode_length

    def traits_of(self) -> np.ndarray:
        return self.state.types.copy()


def make_env(name: str, config=None):
    if name == "facility":
        return FacilityEnv(config or fac.FacilityConfig())
    if name == "team":
        return TeamEnv(config or tm.TeamConfig())
    raise ConfigurationError(f"unknown environment {name!r}")


def principal_episode(env, policy, rng: np.random.Generator) -> Trajectory:
    """Run one full episode; ``policy`` maps (obs, step history) → action."""
    env.reset(rng)
    pre_reward, obs = env.run_pre_phase(rng)
    steps: list[TrajStep] = []
    while not env.done:
        action = int(policy(obs, steps))
        next_obs, reward, agent_actions, feats = env.decision_step(action, rng)
        steps.append(TrajStep(obs, action, agent_actions, feats, reward))
        obs = next_obs
    return Trajectory(
        steps=steps, terminal_obs=obs, traits=env.traits_of(), pre_reward=pre_reward
    )


def trajectory_to_record(traj: Trajectory) -> dict:
    return {
        "config_hash": traj.config_hash,
        "seed": traj.seed,
        "steps": [
            {
                "obs": [float(x) for x in s.obs],
                "action": int(s.action),
                "agent_actions": [int(a) for a in s.agent_actions],
                "reward": float(s.reward),
            }
            for s in traj.steps
        ],
        "terminal_obs": [float(x) for x in traj.terminal_obs],
        "pre_reward": float(traj.pre_reward),
        "traits": [int(m) for m in traj.traits],
    }


def trajectory_from_record(record: dict, env) -> Trajectory:
    """Rebuild a Trajectory, recomputing tracker features from the indices."""
    steps = []
    actions_so_far: list[int] = []
    for k, s in enumerate(record["steps"]):
        agent_actions = np.array(s["agent_actions"], dtype=np.int64)
        actions_so_far.append(int(s["action"]))
        obs_arr = np.array(s["obs"])
        feats = env.features_for_recorded_step(k, actions_so_far, agent_actions, obs_arr)
        steps.append(
            TrajStep(
                obs=obs_arr,
                action=int(s["action"]),
                agent_actions=agent_actions,
                agent_features=feats,
                reward=float(s["reward"]),
            )
        )
    return Trajectory(
        steps=steps,
        terminal_obs=np.array(record["terminal_obs"]),
        traits=np.array(record["traits"], dtype=np.int64),
        pre_reward=float(record.get("pre_reward", 0.0)),
        config_hash=record.get("config_hash", ""),
        seed=int(record.get("seed", 0)),
    )


def write_jsonl(path, trajectories) -> None:
    with open(path, "w") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_record(traj)) + "\n")


def read_jsonl(path, env) -> list[Trajectory]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(trajectory_from_record(json.loads(line), env))
    return out
