"""Branch rollouts through the learned dynamics for policy training.

A rollout starts from a state sampled out of the real buffer, carries the
real prefix into the prior tracker, and then alternates policy action,
dynamics prediction, and belief refresh over the growing imagined history.
Imagined steps carry no background-agent responses, so their response
features enter the prior as zeros. Length never exceeds the episode's
remaining decision budget from the branch point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs.base import Trajectory
from .dynamics import DynamicsModel, dynamics_predict

__all__ = ["ImaginedStep", "ImaginedRollout", "imagine_rollout"]


@dataclass
class ImaginedStep:
    obs: np.ndarray
    belief: np.ndarray  # flattened prior belief rows used by the policy
    action: int
    log_prob: float
    value: float
    reward: float
    mask: np.ndarray


@dataclass
class ImaginedRollout:
    steps: list[ImaginedStep] = field(default_factory=list)
    swm_epoch: int = 0  # staleness tag: SWM training epoch of generation
    bootstrap_value: float = 0.0  # value of the state after the last step

    def __len__(self) -> int:
        return len(self.steps)


def imagine_rollout(
    model: DynamicsModel,
    policy,
    prior_tracker,
    env,
    source: Trajectory,
    branch_index: int,
    horizon: int,
    rng: np.random.Generator,
    swm_epoch: int = 0,
) -> ImaginedRollout:
    """Imagine up to ``horizon`` decisions from step ``branch_index``.

    ``policy`` must expose act(obs, belief, mask, rng) -> (action,
    log_prob, value); ``prior_tracker`` must expose infer_prefix(obs_list,
    action_list, feats_list) -> belief rows.
    """
    from ..policy.network import policy_act  # local import to avoid a cycle

    n_decisions = env.episode_decisions
    budget = min(horizon, n_decisions - branch_index)
    rollout = ImaginedRollout(swm_epoch=swm_epoch)
    if budget <= 0:
        return rollout

    obs_list = [s.obs for s in source.steps[: branch_index + 1]]
    act_list = [s.action for s in source.steps[:branch_index]]
    feat_list = [s.agent_features for s in source.steps[:branch_index]]
    obs = source.steps[branch_index].obs
    zero_feats = np.zeros((env.n_agents, env.agent_feature_dim))

    for _ in range(budget):
        belief = prior_tracker.infer_prefix(obs_list, act_list, feat_list).ravel()
        mask = env.mask_from_obs(obs)
        action, log_prob, value = policy_act(policy, obs, belief, mask, rng)
        next_obs, reward = dynamics_predict(model, obs, action, belief)
        rollout.steps.append(
            ImaginedStep(
                obs=obs,
                belief=belief,
                action=action,
                log_prob=log_prob,
                value=value,
                reward=reward,
                mask=mask,
            )
        )
        act_list = act_list + [action]
        feat_list = feat_list + [zero_feats]
        obs_list = obs_list + [next_obs]
        obs = next_obs

    if branch_index + len(rollout.steps) < n_decisions:
        # horizon-truncated: bootstrap from the value of the final state
        from ..numerics.autodiff import constant

        belief = prior_tracker.infer_prefix(obs_list, act_list, feat_list).ravel()
        x = constant(np.concatenate([obs, belief]).reshape(1, -1))
        rollout.bootstrap_value = float(policy.value(None, x).value[0, 0])
    return rollout
