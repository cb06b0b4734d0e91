"""Timing comparison of the compiled kernels against their Python bodies.

Run with the package importable (editable install or PYTHONPATH=src):

    SWMLAB_NUMBA=1 python benchmarks/bench_kernels.py

With SWMLAB_NUMBA=0 both columns time the interpreted body, which is a
useful sanity check that the harness itself is fair.
"""

from __future__ import annotations

import time

import numpy as np

from swmlab._kernels import (
    NUMBA_ENABLED,
    facility_choice_probs,
    gae_advantages,
    inverse_cdf_rows,
    py_func,
    team_advance,
    warmup,
)


def bench(fn, make_args, repeats: int = 300) -> float:
    fn(*make_args())  # warm any compilation before timing
    args = [make_args() for _ in range(repeats)]
    t0 = time.perf_counter()
    for a in args:
        fn(*a)
    return (time.perf_counter() - t0) / repeats


def main() -> None:
    rng = np.random.default_rng(0)
    g, n_agents, n_fac = 8, 32, 5

    def facility_args():
        return (
            rng.integers(0, g, n_agents),
            rng.integers(0, g, n_agents),
            rng.integers(0, 2, n_agents),
            rng.integers(0, g, n_fac),
            rng.integers(0, g, n_fac),
            rng.integers(0, g * g, n_fac),
            np.array([4.0, 1.0]),
            np.array([0.0, 8.0]),
            np.array([1.0, 1.0]),
            g,
        )

    def cdf_args():
        probs = rng.random((n_agents, n_fac + 1))
        probs /= probs.sum(axis=1, keepdims=True)
        return probs, rng.random(n_agents)

    def team_args():
        return (
            rng.integers(1, g - 1, 4),
            rng.integers(1, g - 1, 4),
            np.arange(4, dtype=np.int64),
            np.array([0, 0, 1, 1], dtype=np.int64),
            np.array([1, 2, 3, 0], dtype=np.int64),
            np.array([0, 0, g - 1, g - 1], dtype=np.int64),
            np.array([0, g - 1, 0, g - 1], dtype=np.int64),
            np.full(4, 10.0),
            np.zeros((4, 4)),
            0,
            4,
        )

    def gae_args():
        return rng.normal(size=2000), rng.normal(size=2001), 0.99, 0.95

    cases = [
        ("facility_choice_probs", facility_choice_probs, facility_args),
        ("inverse_cdf_rows", inverse_cdf_rows, cdf_args),
        ("team_advance", team_advance, team_args),
        ("gae_advantages", gae_advantages, gae_args),
    ]

    warmup()
    print(f"numba enabled: {NUMBA_ENABLED}")
    print(f"{'kernel':<24}{'compiled (us)':>16}{'python (us)':>16}{'speedup':>10}")
    for name, fn, make_args in cases:
        fast = bench(fn, make_args) * 1e6
        slow = bench(py_func(fn), make_args) * 1e6
        print(f"{name:<24}{fast:>16.2f}{slow:>16.2f}{slow / fast:>10.1f}x")


if __name__ == "__main__":
    main()
