"""Finite-difference verification of every training objective.

Each draw builds a small facility instance, randomizes all parameters (the
head and output layers are zero at init, which would hide their upstream
gradients), rolls real episodes for data, and probes a random subset of
scalars in each parameter store against central differences. The
``corrupt`` flag is a negative control: it adds a loss term the tape cannot
see, so the check must fail.
"""

from __future__ import annotations

import numpy as np

from ..envs.base import make_env, principal_episode
from ..envs.facility import FacilityConfig
from ..numerics import autodiff as ad
from ..numerics.autodiff import Tape, constant
from ..numerics.gradcheck import GradCheckReport, finite_diff_check
from ..policy.network import MASK_OFFSET, PolicyNetwork, policy_act
from ..policy.ppo import PpoBatch, build_ppo_batch
from ..policy.tracker import PriorTracker, prior_tracker_loss
from ..swm.dynamics import DynamicsModel
from ..swm.loss import swm_loss
from ..swm.trackers import PosteriorTracker, TrackerDims
from ..trainer.diagnostics import random_valid_policy
from ..trainer.loop import _roll_episode

__all__ = ["gradcheck_suite", "ppo_loss_node", "LOSS_NAMES"]

LOSS_NAMES = ("swm", "prior", "ppo")


def _randomize(store, rng, scale: float = 0.25) -> None:
    for _, p in store.items():
        p.value[:] = rng.normal(0.0, scale, p.value.shape)


def ppo_loss_node(
    policy: PolicyNetwork,
    batch: PpoBatch,
    clip_eps: float,
    tape: Tape | None,
    value_coeff: float = 0.5,
    entropy_coeff: float = 0.01,
):
    """The full clipped-surrogate + value + entropy objective as one node."""
    x = constant(np.concatenate([batch.obs, batch.beliefs], axis=1))
    logits = ad.add_const(tape, policy.logits(tape, x), MASK_OFFSET * (~batch.masks))
    lsm = ad.log_softmax_rows(tape, logits)
    new_lp = ad.take_per_row(tape, lsm, batch.actions)
    adv = constant(batch.advantages.reshape(-1, 1))
    ratio = ad.exp(tape, ad.sub(tape, new_lp, constant(batch.old_log_probs.reshape(-1, 1))))
    surr = ad.minimum(
        tape,
        ad.mul(tape, ratio, adv),
        ad.mul(tape, ad.clip(tape, ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv),
    )
    policy_loss = ad.neg(tape, ad.mean_all(tape, surr))
    probs = ad.softmax_rows(tape, logits)
    entropy = ad.scale(tape, ad.sum_all(tape, ad.mul(tape, probs, lsm)), -1.0 / len(batch))
    v = policy.value(tape, x)
    value_loss = ad.mean_all(
        tape, ad.square(tape, ad.sub(tape, v, constant(batch.returns.reshape(-1, 1))))
    )
    return ad.sub(
        tape,
        ad.add(tape, policy_loss, ad.scale(tape, value_loss, value_coeff)),
        ad.scale(tape, entropy, entropy_coeff),
    )


def _corrupted(builder, store):
    first = store.names()[0]

    def wrapped(s, tape):
        return ad.add_const(tape, builder(s, tape), float(np.sum(store.value(first))))

    return wrapped


def gradcheck_suite(
    n_draws: int = 10,
    seed: int = 20240,
    max_checks: int = 300,
    epsilon: float = 1e-5,
    corrupt: bool = False,
) -> dict[str, GradCheckReport]:
    """Worst finite-difference report per loss over all draws and stores."""
    worst = {name: GradCheckReport(0.0, "", (), 0.0, 0.0, 0) for name in LOSS_NAMES}

    def record(name: str, rep: GradCheckReport) -> None:
        n = worst[name].n_checked + rep.n_checked
        if rep.max_rel_err > worst[name].max_rel_err:
            worst[name] = rep
        worst[name].n_checked = n

    fac_cfg = FacilityConfig(grid_side=3, n_agents=2, n_facilities=2)
    for draw in range(n_draws):
        rng = np.random.default_rng(seed + draw)
        env = make_env("facility", fac_cfg)
        dims = TrackerDims(
            obs_dim=env.obs_dim,
            n_actions=env.n_actions,
            n_agents=env.n_agents,
            feat_dim=env.agent_feature_dim,
            n_traits=env.n_traits,
            enc_hidden=8,
            lstm_hidden=8,
            head_hidden=8,
            behavior_dim=env.feat_behavior_dim,
            gated=env.feat_gated,
            resp_hidden=8,
        )
        posterior = PosteriorTracker(dims, rng)
        prior = PriorTracker(dims, rng)
        model = DynamicsModel(env.obs_dim, env.n_actions, env.n_agents, env.n_traits, 12, rng)
        policy = PolicyNetwork(env.obs_dim, env.n_agents * env.n_traits, env.n_actions, 12, rng)
        for store in (posterior.store, prior.store, model.store, policy.pol_store, policy.val_store):
            _randomize(store, rng)

        trajs = [principal_episode(env, random_valid_policy(env, rng), rng) for _ in range(2)]

        def swm_builder(s, tape):
            return swm_loss(model, posterior, trajs, 0.01, 1.0, tape, response_coeff=2.0)[0]

        for store in (model.store, posterior.store):
            builder = _corrupted(swm_builder, store) if corrupt else swm_builder
            record("swm", finite_diff_check(builder, store, epsilon, max_checks, rng))

        targets = posterior.infer_batch(trajs)

        def prior_builder(s, tape):
            return prior_tracker_loss(prior, trajs, targets, tape)[0]

        builder = _corrupted(prior_builder, prior.store) if corrupt else prior_builder
        record("prior", finite_diff_check(builder, prior.store, epsilon, max_checks, rng))

        episodes = [_roll_episode(env, policy, prior, rng, greedy=False) for _ in range(2)]
        batch = build_ppo_batch([(ep.steps, 0.0) for ep in episodes], 0.99, 0.95)
        # fresh weights after collection so the probed ratios are not all 1
        _randomize(policy.pol_store, rng)
        _randomize(policy.val_store, rng)

        def ppo_builder(s, tape):
            return ppo_loss_node(policy, batch, 0.2, tape)

        for store in (policy.pol_store, policy.val_store):
            builder = _corrupted(ppo_builder, store) if corrupt else ppo_builder
            record("ppo", finite_diff_check(builder, store, epsilon, max_checks, rng))
    return worst
