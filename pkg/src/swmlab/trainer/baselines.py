"""Comparison algorithms sharing the epoch driver.

The model-free baseline keeps the exact policy architecture (the belief
input is a constant uniform vector of the same width) so differences come
from the training signal, not capacity. The ablation keeps the full
model-based loop but removes trait inference.
"""

from __future__ import annotations

import copy

from ..cli.config import ExperimentConfig
from .loop import run_training
from .metrics import MetricsRow

__all__ = ["run_baseline_ppo", "run_mbpo_ablation"]


def _with_algo(cfg: ExperimentConfig, algo: str) -> ExperimentConfig:
    out = copy.deepcopy(cfg)
    out.run.algo = algo
    return out


def run_baseline_ppo(cfg: ExperimentConfig, seed: int, on_row=None) -> list[MetricsRow]:
    return run_training(_with_algo(cfg, "ppo"), seed, on_row=on_row)


def run_mbpo_ablation(cfg: ExperimentConfig, seed: int, on_row=None) -> list[MetricsRow]:
    return run_training(_with_algo(cfg, "mbpo-ablation"), seed, on_row=on_row)
