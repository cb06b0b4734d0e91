"""Joint world-model objective, its training loop, and consistency checks.

Per trajectory the loss is

    sum_t ||s_hat_{t+1} - s_{t+1}||^2  +  reward_coeff * sum_t (r_hat - r)^2
        +  c * sum_agents KL(belief row || uniform)
        -  response_coeff * sum_{t,i} log sum_k b_{i,k} exp(-e_{t,i,k} / 2)

averaged over the batch, with the belief inferred once per trajectory from
its full length and e_{t,i,k} = ||mu_k(ctx_{t,i}) - y_{t,i}||^2 the squared
error of trait class k's response head on agent i's observed behavioral
features. The last term is the negative log-likelihood of those features
under a belief-weighted mixture of unit-variance Gaussians, one component
per trait class. It is what couples the belief to evidence directly: the
state term alone admits a uniform-belief optimum the optimizer will not
leave. The mixture form matters. Its belief gradient is the gap between
belief and per-step responsibility, which stays alive when beliefs
saturate on the wrong class, and its head gradient is responsibility
weighted, so heads specialize from uniform beliefs instead of collapsing
onto one component.

The reported ``total`` covers the first three terms only; the mixture NLL
is reported separately and enters just the returned objective node. During
the trunk warm-up the tracker's belief pathway keeps zero gradient, so the
response heads fit their per-class niches under exactly uniform beliefs
before the belief is allowed to move. Skipping or shortening that settling
period lets whichever head starts globally better claim every agent, and
the belief saturates onto one class for the whole population.

Minimizing the state term is identical to maximizing a unit-variance
Gaussian log-likelihood of the next observation up to the constant
T*D*log(2pi); ``elbo_consistency_check`` verifies that identity numerically,
that the regularizer equals summed categorical KL to uniform, and that the
taped response term matches a direct recomputation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from ..envs.base import Trajectory
from ..exceptions import ContractViolation
from ..numerics import autodiff as ad
from ..numerics.autodiff import Node, Tape, constant
from ..numerics.params import AdamState, adam_update
from ..numerics.stats import kl_categorical_to_uniform, one_hot
from .dynamics import DynamicsModel
from .trackers import PosteriorTracker

__all__ = [
    "SwmLossReport",
    "swm_loss",
    "train_swm",
    "eval_one_step_mse",
    "elbo_consistency_check",
]


@dataclass
class SwmLossReport:
    state_mse: float
    reward_mse: float
    kl: float
    total: float
    resp_nll: float = 0.0


def _transition_arrays(trajs: list[Trajectory], n_actions: int):
    """Stack transitions of equal-length trajectories, step-major per traj."""
    obs_rows, act_rows, next_rows, rew_rows = [], [], [], []
    for tr in trajs:
        T = len(tr)
        for t, step in enumerate(tr.steps):
            obs_rows.append(step.obs)
            act_rows.append(one_hot(step.action, n_actions).ravel())
            nxt = tr.steps[t + 1].obs if t + 1 < T else tr.terminal_obs
            next_rows.append(nxt)
            rew_rows.append([step.reward])
    return (
        np.array(obs_rows),
        np.array(act_rows),
        np.array(next_rows),
        np.array(rew_rows),
    )


# inverse twice-variance of the response mixture components; 0.5 = unit variance
_RESP_BANDWIDTH = 0.5


def _response_arrays(trajs: list[Trajectory], behavior_dim: int, gated: bool):
    """Per-agent (targets, contexts, weights), rows trajectory-major over steps.

    Context is the trait-free trailing feature dims plus a step-fraction
    column. With ``gated`` the target dims after the first are weighted by
    the first, so a stayed-home row scores only its leading flag.
    """
    B, T = len(trajs), len(trajs[0])
    n_agents = trajs[0].steps[0].agent_features.shape[0]
    frac = np.tile((np.arange(T) / T).reshape(-1, 1), (B, 1))
    targets, contexts, weights = [], [], []
    for i in range(n_agents):
        F = np.array([s.agent_features[i] for tr in trajs for s in tr.steps])
        Y = F[:, :behavior_dim]
        targets.append(Y)
        contexts.append(np.concatenate([F[:, behavior_dim:], frac], axis=1))
        if gated:
            weights.append(
                np.concatenate([np.ones((B * T, 1)), np.tile(Y[:, :1], (1, behavior_dim - 1))], axis=1)
            )
        else:
            weights.append(np.ones((B * T, behavior_dim)))
    return targets, contexts, weights


def swm_loss(
    model: DynamicsModel,
    tracker: PosteriorTracker,
    trajs: list[Trajectory],
    c: float,
    reward_coeff: float,
    tape: Tape | None,
    response_coeff: float = 2.0,
) -> tuple[Node, SwmLossReport]:
    if not trajs:
        raise ContractViolation("swm_loss needs a non-empty batch")
    B = len(trajs)
    T = len(trajs[0])
    n_agents = tracker.dims.n_agents
    n_traits = tracker.dims.n_traits

    logits = tracker.logits_batch(trajs, tape)
    probs = ad.softmax_rows(tape, logits)
    logp = ad.log_softmax_rows(tape, logits)

    belief_mat = ad.reshape(tape, probs, B, n_agents * n_traits)
    belief_rep = ad.repeat_rows(tape, belief_mat, T)

    obs_np, act_np, next_np, rew_np = _transition_arrays(trajs, model.n_actions)
    pred_obs, pred_r = model.forward(tape, constant(obs_np), constant(act_np), belief_rep)

    state_term = ad.scale(
        tape, ad.sum_all(tape, ad.square(tape, ad.sub(tape, pred_obs, constant(next_np)))), 1.0 / B
    )
    reward_term = ad.scale(
        tape, ad.sum_all(tape, ad.square(tape, ad.sub(tape, pred_r, constant(rew_np)))), 1.0 / B
    )
    # mean over batch of sum_agents KL-to-uniform = N*log K + E_batch[sum p log p]
    kl_term = ad.add_const(
        tape,
        ad.scale(tape, ad.sum_all(tape, ad.mul(tape, probs, logp)), 1.0 / B),
        n_agents * np.log(n_traits),
    )

    total = ad.add(
        tape,
        ad.add(tape, state_term, ad.scale(tape, reward_term, reward_coeff)),
        ad.scale(tape, kl_term, c),
    )

    objective = total
    resp_val = 0.0
    if response_coeff and getattr(tracker, "has_response_model", False):
        d = tracker.dims
        tgt, ctx, wgt = _response_arrays(trajs, d.behavior_dim, d.gated)
        logb_mat = ad.reshape(tape, logp, B, n_agents * n_traits)
        ones_col = constant(np.ones((d.behavior_dim, 1)))
        resp = None
        for i in range(n_agents):
            mus = tracker.response_class_means(tape, constant(ctx[i]))
            errs = []
            for k in range(n_traits):
                err = ad.square(tape, ad.sub(tape, mus[k], constant(tgt[i])))
                errs.append(ad.matmul(tape, ad.mul(tape, err, constant(wgt[i])), ones_col))
            logb_i = ad.slice_cols(tape, logb_mat, i * n_traits, (i + 1) * n_traits)
            scores = ad.sub(
                tape,
                ad.repeat_rows(tape, logb_i, T),
                ad.scale(tape, ad.concat_cols(tape, errs), _RESP_BANDWIDTH),
            )
            # row logsumexp: scores[:, :1] - log_softmax(scores)[:, :1]
            lse = ad.sub(
                tape,
                ad.slice_cols(tape, scores, 0, 1),
                ad.slice_cols(tape, ad.log_softmax_rows(tape, scores), 0, 1),
            )
            term = ad.neg(tape, ad.sum_all(tape, lse))
            resp = term if resp is None else ad.add(tape, resp, term)
        resp = ad.scale(tape, resp, 1.0 / B)
        resp_val = resp.item()
        objective = ad.add(tape, total, ad.scale(tape, resp, response_coeff))

    report = SwmLossReport(
        state_mse=state_term.item(),
        reward_mse=reward_term.item(),
        kl=kl_term.item(),
        total=total.item(),
        resp_nll=resp_val,
    )
    return objective, report


def train_swm(
    model: DynamicsModel,
    tracker: PosteriorTracker,
    trajs: list[Trajectory],
    epochs: int,
    batch_size: int,
    adam_model: AdamState,
    adam_tracker: AdamState,
    rng: np.random.Generator,
    c: float = 0.01,
    reward_coeff: float = 1.0,
    response_coeff: float = 2.0,
    trunk_warmup_steps: int = 0,
) -> list[SwmLossReport]:
    """Joint minibatch descent over both stores; one report per epoch.

    For the first ``trunk_warmup_steps`` tracker updates (counted across
    calls via the tracker's Adam step counter) the belief pathway's
    gradients are zeroed so the response heads settle under uniform
    beliefs; counting updates rather than epochs keeps the settling
    period meaningful while the data buffer is still filling.
    """
    if not trajs:
        raise ContractViolation("train_swm requires at least one trajectory")
    can_freeze = trunk_warmup_steps > 0 and getattr(tracker, "has_response_model", False)
    history = []
    n = len(trajs)
    for _ in range(epochs):
        order = rng.permutation(n)
        sums = np.zeros(5)
        n_batches = 0
        for lo in range(0, n, batch_size):
            batch = [trajs[i] for i in order[lo : lo + batch_size]]
            tape = Tape()
            objective, rep = swm_loss(model, tracker, batch, c, reward_coeff, tape, response_coeff)
            tape.backward(objective)
            if can_freeze and adam_tracker.t < trunk_warmup_steps:
                for name, p in tracker.store.items():
                    if not name.startswith("resp."):
                        p.grad[:] = 0.0
            adam_update(tracker.store, adam_tracker)
            adam_update(model.store, adam_model)
            sums += (rep.state_mse, rep.reward_mse, rep.kl, rep.total, rep.resp_nll)
            n_batches += 1
        history.append(SwmLossReport(*(sums / n_batches)))
    return history


def eval_one_step_mse(
    model: DynamicsModel | None,
    tracker: PosteriorTracker | None,
    trajs: list[Trajectory],
    mode: str = "posterior",
) -> tuple[float, float | None]:
    """Held-out per-dimension one-step errors.

    Modes: "posterior" uses the tracker's full-trajectory belief,
    "uniform" the trait-free constant belief, "persistence" predicts
    s_{t+1} = s_t (no reward prediction → reward error None).
    """
    if not trajs:
        raise ContractViolation("evaluation needs at least one trajectory")
    obs_dim = trajs[0].steps[0].obs.shape[0]
    if mode == "persistence":
        se, n_tr = 0.0, 0
        for tr in trajs:
            for t, step in enumerate(tr.steps):
                nxt = tr.steps[t + 1].obs if t + 1 < len(tr) else tr.terminal_obs
                se += float(((nxt - step.obs) ** 2).sum())
                n_tr += 1
        return se / (n_tr * obs_dim), None

    n_agents = model.n_agents
    n_traits = model.n_traits
    se_s, se_r, n_tr = 0.0, 0.0, 0
    for tr in trajs:
        if mode == "posterior":
            belief = tracker.infer(tr).ravel()
        elif mode == "uniform":
            belief = np.full(n_agents * n_traits, 1.0 / n_traits)
        else:
            raise ContractViolation(f"unknown evaluation mode {mode!r}")
        obs_np, act_np, next_np, rew_np = _transition_arrays([tr], model.n_actions)
        bel = constant(np.tile(belief, (len(tr), 1)))
        pred_obs, pred_r = model.forward(None, constant(obs_np), constant(act_np), bel)
        se_s += float(((pred_obs.value - next_np) ** 2).sum())
        se_r += float(((pred_r.value - rew_np) ** 2).sum())
        n_tr += len(tr)
    return se_s / (n_tr * obs_dim), se_r / n_tr


def elbo_consistency_check(
    model: DynamicsModel, tracker: PosteriorTracker, traj: Trajectory, c: float
) -> dict:
    """Numerical check of the loss ↔ log-likelihood correspondence.

    Confirms state_sq == -2*loglik - T*D*log(2pi) where loglik is the
    unit-variance Gaussian log-density of the actual next observations
    under the model's predictions, that the taped KL term equals the summed
    per-agent categorical KL to uniform, and that the taped response mixture
    NLL matches a plain recomputation from the stored weights.
    """
    belief_rows = tracker.infer(traj)
    obs_np, act_np, next_np, _ = _transition_arrays([traj], model.n_actions)
    bel = constant(np.tile(belief_rows.ravel(), (len(traj), 1)))
    pred_obs, _ = model.forward(None, constant(obs_np), constant(act_np), bel)

    T, D = next_np.shape
    state_sq = float(((pred_obs.value - next_np) ** 2).sum())
    loglik = sum(
        float(multivariate_normal.logpdf(next_np[t], mean=pred_obs.value[t], cov=np.eye(D)))
        for t in range(T)
    )
    dev_state = abs(state_sq - (-2.0 * loglik - T * D * np.log(2.0 * np.pi)))

    _, rep = swm_loss(model, tracker, [traj], c, 1.0, None)
    kl_direct = sum(kl_categorical_to_uniform(row) for row in belief_rows)
    dev_kl = abs(rep.kl - kl_direct)

    dev_resp = 0.0
    if getattr(tracker, "has_response_model", False):
        d = tracker.dims
        tgt, ctx, wgt = _response_arrays([traj], d.behavior_dim, d.gated)
        w0, b0 = tracker.store.value("resp.w0"), tracker.store.value("resp.b0")
        resp_direct = 0.0
        for i in range(d.n_agents):
            h = np.tanh(ctx[i] @ w0 + b0)
            errs = []
            for k in range(d.n_traits):
                mu = h @ tracker.store.value(f"resp.head{k}.w") + tracker.store.value(
                    f"resp.head{k}.b"
                )
                errs.append((((mu - tgt[i]) ** 2) * wgt[i]).sum(axis=1))
            scores = np.log(belief_rows[i])[None, :] - _RESP_BANDWIDTH * np.column_stack(errs)
            resp_direct -= float(logsumexp(scores, axis=1).sum())
        dev_resp = abs(rep.resp_nll - resp_direct)

    return {
        "state_sq": state_sq,
        "gaussian_loglik": loglik,
        "dev_state": dev_state,
        "dev_kl": dev_kl,
        "dev_resp": dev_resp,
        "max_dev": max(dev_state, dev_kl, dev_resp),
    }
