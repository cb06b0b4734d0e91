"""Hot inner loops, numba-compiled when available.

Simulation of the background-agent populations and a few small recursions
dominate desk-scale runtime, so these functions are written loop-style and
wrapped with ``numba.njit``. Setting the environment variable
``SWMLAB_NUMBA=0`` (or uninstalling numba) selects the plain-Python fallback,
which is the *same* source interpreted by CPython.

Because both modes execute identical scalar floating-point operations in
identical order (``math.exp`` rather than vectorized ``np.exp``, sequential
accumulation rather than pairwise reduction), the compiled and interpreted
paths produce bitwise-identical results. ``benchmarks/bench_kernels.py``
times the two modes against each other.
"""

from __future__ import annotations

import math
import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("SWMLAB_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def py_func(kernel):
    """Return the interpreted version of a (possibly jitted) kernel."""
    return getattr(kernel, "py_func", kernel)


@_njit(cache=True)
def facility_choice_probs(
    pos_r,
    pos_c,
    traits,
    placed_r,
    placed_c,
    placed_cell,
    w_dist,
    w_cong,
    bias,
    grid_side,
):
    """Per-agent choice distribution over placed facilities plus stay-home.

    Utility of facility f for agent i of trait class k:

        u = bias[k] - w_dist[k] * manhattan(i, f) / grid_side - w_cong[k] * c(f)

    where the congestion c(f) is the fraction of *other* agents whose nearest
    placed facility is f (nearest by Manhattan distance, ties to the lowest
    cell index). Stay-home has utility 0. Rows are softmax over utilities,
    columns ordered as (facilities in placement order, stay-home last). With
    no facilities placed the stay-home probability is 1.
    """
    n_agents = pos_r.shape[0]
    n_fac = placed_r.shape[0]
    probs = np.zeros((n_agents, n_fac + 1))
    if n_fac == 0:
        for i in range(n_agents):
            probs[i, 0] = 1.0
        return probs

    # Nearest-facility assignment per agent (pre-step, simultaneous response).
    nearest = np.empty(n_agents, dtype=np.int64)
    counts = np.zeros(n_fac, dtype=np.int64)
    for j in range(n_agents):
        best = 0
        best_d = abs(pos_r[j] - placed_r[0]) + abs(pos_c[j] - placed_c[0])
        for f in range(1, n_fac):
            d = abs(pos_r[j] - placed_r[f]) + abs(pos_c[j] - placed_c[f])
            if d < best_d or (d == best_d and placed_cell[f] < placed_cell[best]):
                best = f
                best_d = d
        nearest[j] = best
        counts[best] += 1

    for i in range(n_agents):
        k = traits[i]
        u_max = 0.0  # stay-home utility
        utils = np.empty(n_fac + 1)
        for f in range(n_fac):
            dist = abs(pos_r[i] - placed_r[f]) + abs(pos_c[i] - placed_c[f])
            others = counts[f]
            if nearest[i] == f:
                others -= 1
            cong = others / n_agents
            u = bias[k] - w_dist[k] * dist / grid_side - w_cong[k] * cong
            utils[f] = u
            if u > u_max:
                u_max = u
        utils[n_fac] = 0.0
        total = 0.0
        for f in range(n_fac + 1):
            e = math.exp(utils[f] - u_max)
            utils[f] = e
            total += e
        for f in range(n_fac + 1):
            probs[i, f] = utils[f] / total
    return probs


@_njit(cache=True)
def inverse_cdf_rows(probs, uniforms):
    """Inverse-CDF draw per row; sequential accumulation fixes the tie rule."""
    n = probs.shape[0]
    k = probs.shape[1]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = 0.0
        idx = k - 1
        for j in range(k):
            c += probs[i, j]
            if uniforms[i] < c:
                idx = j
                break
        out[i] = idx
    return out


@_njit(cache=True)
def team_advance(
    pos_r,
    pos_c,
    types,
    team_ids,
    storable,
    corner_r,
    corner_c,
    stocks,
    tallies,
    first_agent,
    last_agent,
):
    """Advance agents [first_agent, last_agent) one step, in index order.

    An agent moves toward the corner holding its storable resource type only
    if some teammate's type equals that resource's producer type and the
    corner still has stock. Movement reduces Manhattan distance one cell per
    step, row direction first. Standing on the corner with stock remaining
    extracts one unit into the team tally. Mutates pos/stocks/tallies;
    returns (moved, stored) flags per agent.
    """
    n = pos_r.shape[0]
    moved = np.zeros(n, dtype=np.bool_)
    stored = np.zeros(n, dtype=np.bool_)
    for i in range(first_agent, last_agent):
        res = storable[i]
        enabled = False
        if stocks[res] > 0:
            for j in range(n):
                if j != i and team_ids[j] == team_ids[i] and types[j] == res:
                    enabled = True
                    break
        if not enabled:
            continue
        tr = corner_r[res]
        tc = corner_c[res]
        if pos_r[i] != tr:
            pos_r[i] += 1 if tr > pos_r[i] else -1
            moved[i] = True
        elif pos_c[i] != tc:
            pos_c[i] += 1 if tc > pos_c[i] else -1
            moved[i] = True
        if pos_r[i] == tr and pos_c[i] == tc and stocks[res] > 0:
            stocks[res] -= 1
            tallies[team_ids[i], res] += 1
            stored[i] = True
    return moved, stored


@_njit(cache=True)
def gae_advantages(rewards, values, gamma, lam):
    """Generalized advantage estimation over one episode.

    ``values`` carries one bootstrap entry beyond the final reward.
    """
    n = rewards.shape[0]
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    facility_choice_probs(
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.ones(1),
        np.ones(1),
        np.ones(1),
        2,
    )
    inverse_cdf_rows(np.ones((1, 1)), np.zeros(1))
    team_advance(
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.zeros(1, dtype=np.int64),
        np.ones(1, dtype=np.int64),
        np.zeros((1, 1), dtype=np.int64),
        0,
        1,
    )
    gae_advantages(np.zeros(1), np.zeros(2), 0.99, 0.95)
