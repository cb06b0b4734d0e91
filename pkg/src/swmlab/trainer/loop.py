"""The epoch loop: collect, learn the world model, imagine, improve, evaluate.

Every epoch runs six phases with independent random streams derived from
(master seed, epoch, phase index); parallel workers inside a phase split
further by item index, and results are merged in item order, so metrics are
identical at any SWMLAB_THREADS setting. An epoch either commits completely
or, on any raised error, leaves parameters, optimizer moments, buffers, and
counters exactly as they were.

Three algorithms share the driver: "swm-ap" (the full loop), "ppo"
(model-free, uniform belief input, phases 2-4 skipped), and
"mbpo-ablation" (the loop with beliefs pinned to uniform everywhere, which
isolates what trait inference itself contributes).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..cli.config import ExperimentConfig
from ..envs.base import Trajectory, make_env, principal_episode
from ..numerics.autodiff import Tape, constant
from ..numerics.params import AdamState, ParameterStore, adam_update
from ..policy.network import PolicyNetwork, policy_act
from ..policy.tracker import PriorTracker, prior_tracker_loss
from ..swm.dynamics import DynamicsModel
from ..swm.loss import train_swm
from ..swm.rollout import imagine_rollout
from ..swm.trackers import PosteriorTracker, TrackerDims
from .buffers import EnvBuffer, ModelBuffer
from .diagnostics import trait_confusion
from .metrics import MetricsRow

__all__ = [
    "PolicyStep",
    "RealEpisode",
    "FrozenUniformTracker",
    "Trainer",
    "collect_real",
    "evaluate",
    "evaluate_full",
    "run_training",
    "seeded_map",
]

SEED_STRIDE = 1_000_003
N_PHASES = 16  # seed-space slots per epoch; six are used
PH_COLLECT, PH_SWM, PH_PRIOR, PH_IMAGINE, PH_PPO, PH_EVAL = range(6)


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("SWMLAB_THREADS", "1")))
    except ValueError:
        return 1


def seeded_map(fn, n_items: int, base_seed: int) -> list:
    """Run ``fn(i, rng)`` for each item; item i's stream depends only on
    ``base_seed`` and i, and results come back in index order regardless of
    the worker count."""
    seeds = [base_seed * SEED_STRIDE + i for i in range(n_items)]
    workers = min(_n_threads(), max(1, n_items))
    if workers == 1:
        return [fn(i, np.random.default_rng(s)) for i, s in enumerate(seeds)]
    results: list = [None] * n_items
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, np.random.default_rng(s)) for i, s in enumerate(seeds)]
        for i, fut in enumerate(futures):
            results[i] = fut.result()
    return results


@dataclass
class PolicyStep:
    """One principal decision with the bookkeeping PPO needs later."""

    obs: np.ndarray
    belief: np.ndarray
    action: int
    log_prob: float
    value: float
    reward: float
    mask: np.ndarray


@dataclass
class RealEpisode:
    traj: Trajectory
    steps: list[PolicyStep]


class FrozenUniformTracker:
    """Tracker stand-in whose belief is pinned to uniform.

    Slots into every place a trait tracker is consumed (world-model loss,
    imagination, action selection) so the ablation runs the identical
    pipeline with trait inference removed. Owns no parameters; the uniform
    belief contributes zero KL and no gradient.
    """

    def __init__(self, dims: TrackerDims):
        self.dims = dims
        self.store = ParameterStore()

    def logits_batch(self, trajs, tape):
        return constant(np.zeros((len(trajs) * self.dims.n_agents, self.dims.n_traits)))

    def infer(self, traj):
        return np.full((self.dims.n_agents, self.dims.n_traits), 1.0 / self.dims.n_traits)

    def infer_prefix(self, obs_list, action_list, feats_list):
        return self.infer(None)


def _roll_episode(env, policy, prior_tracker, rng, greedy: bool) -> RealEpisode:
    """One real episode with beliefs inferred online from the causal prefix."""
    uniform = np.full(env.n_agents * env.n_traits, 1.0 / env.n_traits)
    records = []

    def act(obs, steps):
        if prior_tracker is None:
            belief = uniform
        else:
            belief = prior_tracker.infer_prefix(
                [s.obs for s in steps] + [obs],
                [s.action for s in steps],
                [s.agent_features for s in steps],
            ).ravel()
        mask = env.action_mask()
        action, log_prob, value = policy_act(policy, obs, belief, mask, rng, greedy=greedy)
        records.append((belief, action, log_prob, value, mask))
        return action

    traj = principal_episode(env, act, rng)
    steps = [
        PolicyStep(s.obs, b, a, lp, v, s.reward, m)
        for s, (b, a, lp, v, m) in zip(traj.steps, records)
    ]
    return RealEpisode(traj=traj, steps=steps)


def collect_real(
    env, policy, prior_tracker, n_episodes: int, seed: int, greedy: bool = False
) -> tuple[list[RealEpisode], int]:
    """Roll ``n_episodes`` real episodes; returns them with the count of
    principal decisions consumed. Each worker gets its own environment
    instance, so the sampled set is independent of thread count."""
    if n_episodes == 0:
        return [], 0

    def item(i, rng):
        return _roll_episode(make_env(env.name, env.config), policy, prior_tracker, rng, greedy)

    episodes = seeded_map(item, n_episodes, seed)
    return episodes, sum(len(ep.traj) for ep in episodes)


def evaluate_full(policy, prior_tracker, env, n_eval: int, seed: int):
    """Greedy-policy evaluation; returns (mean, std, trajectories)."""
    episodes, _ = collect_real(env, policy, prior_tracker, n_eval, seed, greedy=True)
    returns = np.array([ep.traj.total_reward for ep in episodes])
    return float(returns.mean()), float(returns.std()), [ep.traj for ep in episodes]


def evaluate(policy, prior_tracker, env, n_eval: int, seed: int) -> tuple[float, float]:
    mean, std, _ = evaluate_full(policy, prior_tracker, env, n_eval, seed)
    return mean, std


class Trainer:
    """All learned components plus the buffers, driven one epoch at a time."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        cfg.validate()
        self.cfg = cfg
        self.seed = int(seed)
        self.algo = cfg.run.algo
        self.env = make_env(cfg.run.env, cfg.env_config())
        env = self.env

        init_rng = np.random.default_rng(self.seed)
        dims = TrackerDims(
            obs_dim=env.obs_dim,
            n_actions=env.n_actions,
            n_agents=env.n_agents,
            feat_dim=env.agent_feature_dim,
            n_traits=env.n_traits,
            enc_hidden=cfg.swm.tracker_hidden,
            lstm_hidden=cfg.swm.tracker_hidden,
            head_hidden=cfg.swm.tracker_hidden,
            behavior_dim=env.feat_behavior_dim,
            gated=env.feat_gated,
            resp_hidden=cfg.swm.tracker_hidden,
        )
        # every algorithm builds the same components in the same order so
        # the policy initialization (and rng stream) is shared exactly
        self.posterior = PosteriorTracker(dims, init_rng)
        self.prior = PriorTracker(dims, init_rng)
        self.model = DynamicsModel(
            env.obs_dim,
            env.n_actions,
            env.n_agents,
            env.n_traits,
            cfg.swm.hidden,
            init_rng,
            n_hidden_layers=cfg.swm.model_layers,
        )
        self.policy = PolicyNetwork(
            env.obs_dim, env.n_agents * env.n_traits, env.n_actions, cfg.policy.hidden, init_rng
        )
        self.frozen = FrozenUniformTracker(dims)

        self.adam_model = AdamState(lr=cfg.swm.lr)
        self.adam_posterior = AdamState(lr=cfg.swm.lr)
        self.adam_prior = AdamState(lr=cfg.prior.lr)
        self.adam_pol = AdamState(lr=cfg.policy.lr)
        self.adam_val = AdamState(lr=cfg.policy.lr)

        self.env_buffer = EnvBuffer(cfg.buffers.env_capacity)
        self.model_buffer = ModelBuffer(cfg.buffers.model_capacity)
        self.env_steps = 0
        self.swm_epoch = 0
        self.epoch = 0

    # -- seeding ---------------------------------------------------------

    def _phase_seed(self, phase: int) -> int:
        return (self.seed * SEED_STRIDE + self.epoch) * N_PHASES + phase

    def _acting_tracker(self):
        return self.prior if self.algo == "swm-ap" else None

    # -- epoch atomicity --------------------------------------------------

    def _stores(self) -> dict[str, ParameterStore]:
        return {
            "posterior": self.posterior.store,
            "prior": self.prior.store,
            "model": self.model.store,
            "policy": self.policy.pol_store,
            "value": self.policy.val_store,
        }

    def _adams(self) -> dict[str, AdamState]:
        return {
            "model": self.adam_model,
            "posterior": self.adam_posterior,
            "prior": self.adam_prior,
            "policy": self.adam_pol,
            "value": self.adam_val,
        }

    def _snapshot(self) -> dict:
        return {
            "stores": {k: s.clone_values() for k, s in self._stores().items()},
            "adams": {
                k: (a.t, {n: x.copy() for n, x in a.m.items()}, {n: x.copy() for n, x in a.v.items()})
                for k, a in self._adams().items()
            },
            "env_items": list(self.env_buffer.items),
            "env_inserted": self.env_buffer.n_inserted,
            "model_items": list(self.model_buffer.items),
            "model_inserted": self.model_buffer.n_inserted,
            "env_steps": self.env_steps,
            "swm_epoch": self.swm_epoch,
            "epoch": self.epoch,
        }

    def _restore(self, snap: dict) -> None:
        for k, store in self._stores().items():
            store.load_values(snap["stores"][k])
            store.zero_grads()
        for k, adam in self._adams().items():
            t, m, v = snap["adams"][k]
            adam.t = t
            adam.m = {n: x.copy() for n, x in m.items()}
            adam.v = {n: x.copy() for n, x in v.items()}
        self.env_buffer.items = list(snap["env_items"])
        self.env_buffer.n_inserted = snap["env_inserted"]
        self.model_buffer.items = list(snap["model_items"])
        self.model_buffer.n_inserted = snap["model_inserted"]
        self.env_steps = snap["env_steps"]
        self.swm_epoch = snap["swm_epoch"]
        self.epoch = snap["epoch"]

    # -- phases -----------------------------------------------------------

    def _train_prior(self) -> float:
        cfg = self.cfg
        rng = np.random.default_rng(self._phase_seed(PH_PRIOR))
        trajs = self.env_buffer.recent(cfg.prior.window)
        last_pass: list[float] = []
        for _ in range(cfg.prior.passes):
            order = rng.permutation(len(trajs))
            last_pass = []
            for lo in range(0, len(trajs), cfg.prior.batch_size):
                batch = [trajs[i] for i in order[lo : lo + cfg.prior.batch_size]]
                targets = self.posterior.infer_batch(batch)
                tape = Tape()
                loss, val = prior_tracker_loss(self.prior, batch, targets, tape)
                tape.backward(loss)
                adam_update(self.prior.store, self.adam_prior)
                last_pass.append(val)
        return float(np.mean(last_pass)) if last_pass else 0.0

    def _imagine(self, n_real_steps: int) -> None:
        cfg = self.cfg
        needed = cfg.rollout.ratio * n_real_steps
        if needed <= 0 or cfg.rollout.horizon <= 0 or len(self.env_buffer) == 0:
            return
        rng = np.random.default_rng(self._phase_seed(PH_IMAGINE))
        branches = []
        planned = 0
        while planned < needed:
            traj, idx = self.env_buffer.sample_branch_points(rng, 1)[0]
            branches.append((traj, idx))
            planned += min(cfg.rollout.horizon, self.env.episode_decisions - idx)
        tracker = self.prior if self.algo == "swm-ap" else self.frozen

        def gen(i, item_rng):
            traj, idx = branches[i]
            return imagine_rollout(
                self.model,
                self.policy,
                tracker,
                self.env,
                traj,
                idx,
                cfg.rollout.horizon,
                item_rng,
                swm_epoch=self.swm_epoch,
            )

        rollouts = seeded_map(gen, len(branches), self._phase_seed(PH_IMAGINE))
        self.model_buffer.extend(rollouts)

    def _imagined_episodes(self, needed: int) -> list[tuple[list, float]]:
        """Newest rollouts first, trimmed so the step count is exact.

        When a rollout is cut, the discarded head step's value estimate
        becomes the bootstrap for the kept part.
        """
        out: list[tuple[list, float]] = []
        remaining = needed
        for r in reversed(self.model_buffer.items):
            if remaining <= 0:
                break
            if len(r.steps) <= remaining:
                out.append((r.steps, r.bootstrap_value))
                remaining -= len(r.steps)
            else:
                out.append((r.steps[:remaining], r.steps[remaining].value))
                remaining = 0
        out.reverse()
        return out

    def run_epoch(self) -> MetricsRow:
        t0 = time.perf_counter()
        snap = self._snapshot()
        try:
            row = self._run_epoch_inner()
        except BaseException:
            self._restore(snap)
            raise
        if self.cfg.run.record_timing:
            row.wall_secs = time.perf_counter() - t0
        self.epoch += 1
        return row

    def _run_epoch_inner(self) -> MetricsRow:
        from ..policy.ppo import build_ppo_batch, ppo_update

        cfg = self.cfg
        episodes, n_steps = collect_real(
            self.env,
            self.policy,
            self._acting_tracker(),
            cfg.run.episodes_per_epoch,
            self._phase_seed(PH_COLLECT),
        )
        self.env_buffer.extend([ep.traj for ep in episodes])
        self.env_steps += n_steps

        state_loss = reward_loss = prior_loss = trait_acc = 0.0
        model_based = self.algo != "ppo"
        if model_based:
            rng = np.random.default_rng(self._phase_seed(PH_SWM))
            tracker = self.posterior if self.algo == "swm-ap" else self.frozen
            reports = train_swm(
                self.model,
                tracker,
                self.env_buffer.recent(cfg.swm.window),
                cfg.swm.passes,
                cfg.swm.batch_size,
                self.adam_model,
                self.adam_posterior,
                rng,
                c=cfg.swm.c,
                reward_coeff=cfg.swm.reward_coeff,
                response_coeff=cfg.swm.response_coeff,
                trunk_warmup_steps=cfg.swm.warmup_steps,
            )
            state_loss, reward_loss = reports[-1].state_mse, reports[-1].reward_mse
            self.swm_epoch += 1
            self.model_buffer.evict_stale(self.swm_epoch)

        if self.algo == "swm-ap":
            prior_loss = self._train_prior()

        if model_based:
            self._imagine(n_steps)

        ppo_episodes: list[tuple[list, float]] = [(ep.steps, 0.0) for ep in episodes]
        if model_based:
            ppo_episodes += self._imagined_episodes(cfg.rollout.ratio * n_steps)
        batch = build_ppo_batch(ppo_episodes, cfg.policy.gamma, cfg.policy.lam)
        ppo_update(
            self.policy,
            batch,
            cfg.policy.clip_eps,
            cfg.policy.ppo_epochs,
            cfg.policy.minibatch,
            self.adam_pol,
            self.adam_val,
            np.random.default_rng(self._phase_seed(PH_PPO)),
            value_coeff=cfg.policy.value_coeff,
            entropy_coeff=cfg.policy.entropy_coeff,
        )

        mean, std, eval_trajs = evaluate_full(
            self.policy,
            self._acting_tracker(),
            self.env,
            cfg.run.eval_episodes,
            self._phase_seed(PH_EVAL),
        )
        if self.algo == "swm-ap":
            cm = trait_confusion(
                self.posterior, self.env, 0, np.random.default_rng(0), trajectories=eval_trajs
            )
            trait_acc = cm.accuracy_aligned()

        return MetricsRow(
            epoch=self.epoch,
            env_steps=self.env_steps,
            eval_return_mean=mean,
            eval_return_std=std,
            swm_state_loss=state_loss,
            swm_reward_loss=reward_loss,
            prior_loss=prior_loss,
            trait_acc=trait_acc,
            wall_secs=0.0,
        )


def run_training(cfg: ExperimentConfig, seed: int, on_row=None) -> list[MetricsRow]:
    """Full run for one seed; returns one MetricsRow per epoch."""
    trainer = Trainer(cfg, seed)
    rows = []
    for _ in range(cfg.run.epochs):
        row = trainer.run_epoch()
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows
