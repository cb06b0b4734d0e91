"""Clipped-surrogate PPO with generalized advantage estimation.

Batches mix real and imagined decision steps; each step carries the mask
and old log-prob recorded when it was generated, so slightly stale data is
handled by the ratio clip rather than discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._kernels import gae_advantages
from ..numerics import autodiff as ad
from ..numerics.autodiff import Tape, constant
from ..numerics.params import AdamState, adam_update
from .network import MASK_OFFSET, PolicyNetwork

__all__ = ["PpoBatch", "compute_gae", "build_ppo_batch", "ppo_update"]


@dataclass
class PpoBatch:
    obs: np.ndarray  # (R, obs_dim)
    beliefs: np.ndarray  # (R, belief_dim)
    actions: np.ndarray  # (R,) int64
    old_log_probs: np.ndarray  # (R,)
    advantages: np.ndarray  # (R,), normalized
    returns: np.ndarray  # (R,)
    masks: np.ndarray  # (R, n_actions) bool

    def __len__(self) -> int:
        return self.obs.shape[0]


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """``values`` has one bootstrap entry more than ``rewards``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    adv = gae_advantages(rewards, values, gamma, lam)
    return adv, adv + values[:-1]


def build_ppo_batch(
    episodes: list[tuple[list, float]],
    gamma: float,
    lam: float,
    normalize: bool = True,
) -> PpoBatch:
    """Assemble per-episode step records into one flat update batch.

    Each episode is (steps, bootstrap_value) where every step exposes
    obs/belief/action/log_prob/value/reward/mask attributes and the
    bootstrap value is 0 at a true episode end.
    """
    obs, beliefs, actions, old_lp, advs, rets, masks = [], [], [], [], [], [], []
    for steps, bootstrap in episodes:
        rewards = np.array([s.reward for s in steps])
        values = np.array([s.value for s in steps] + [bootstrap])
        adv, ret = compute_gae(rewards, values, gamma, lam)
        for k, s in enumerate(steps):
            obs.append(s.obs)
            beliefs.append(np.asarray(s.belief).ravel())
            actions.append(s.action)
            old_lp.append(s.log_prob)
            advs.append(adv[k])
            rets.append(ret[k])
            masks.append(s.mask)
    advs = np.array(advs)
    if normalize and advs.shape[0] > 1:
        advs = (advs - advs.mean()) / max(float(advs.std()), 1e-8)
    return PpoBatch(
        obs=np.array(obs),
        beliefs=np.array(beliefs),
        actions=np.array(actions, dtype=np.int64),
        old_log_probs=np.array(old_lp),
        advantages=advs,
        returns=np.array(rets),
        masks=np.array(masks, dtype=bool),
    )


def ppo_update(
    policy: PolicyNetwork,
    batch: PpoBatch,
    clip_eps: float,
    epochs: int,
    minibatch_size: int,
    adam_pol: AdamState,
    adam_val: AdamState,
    rng: np.random.Generator,
    value_coeff: float = 0.5,
    entropy_coeff: float = 0.01,
) -> dict:
    """Minibatched clipped-surrogate ascent; returns averaged diagnostics."""
    n = len(batch)
    stats = np.zeros(4)
    n_updates = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, minibatch_size):
            idx = order[lo : lo + minibatch_size]
            tape = Tape()
            x = constant(np.concatenate([batch.obs[idx], batch.beliefs[idx]], axis=1))
            offsets = MASK_OFFSET * (~batch.masks[idx])
            logits = ad.add_const(tape, policy.logits(tape, x), offsets)
            lsm = ad.log_softmax_rows(tape, logits)
            new_lp = ad.take_per_row(tape, lsm, batch.actions[idx])

            adv = constant(batch.advantages[idx].reshape(-1, 1))
            ratio = ad.exp(
                tape, ad.sub(tape, new_lp, constant(batch.old_log_probs[idx].reshape(-1, 1)))
            )
            surr = ad.minimum(
                tape,
                ad.mul(tape, ratio, adv),
                ad.mul(tape, ad.clip(tape, ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv),
            )
            policy_loss = ad.neg(tape, ad.mean_all(tape, surr))

            probs = ad.softmax_rows(tape, logits)
            entropy = ad.scale(
                tape, ad.sum_all(tape, ad.mul(tape, probs, lsm)), -1.0 / idx.shape[0]
            )

            v = policy.value(tape, x)
            value_loss = ad.mean_all(
                tape, ad.square(tape, ad.sub(tape, v, constant(batch.returns[idx].reshape(-1, 1))))
            )

            total = ad.sub(
                tape,
                ad.add(tape, policy_loss, ad.scale(tape, value_loss, value_coeff)),
                ad.scale(tape, entropy, entropy_coeff),
            )
            tape.backward(total)
            adam_update(policy.pol_store, adam_pol)
            adam_update(policy.val_store, adam_val)

            clip_frac = float(np.mean(np.abs(ratio.value.ravel() - 1.0) > clip_eps))
            stats += (policy_loss.item(), value_loss.item(), entropy.item(), clip_frac)
            n_updates += 1
    keys = ("policy_loss", "value_loss", "entropy", "clip_fraction")
    return dict(zip(keys, stats / max(n_updates, 1)))
