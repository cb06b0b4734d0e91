"""Training orchestration: buffers, epoch loop, baselines, diagnostics."""

from .baselines import run_baseline_ppo, run_mbpo_ablation
from .buffers import EnvBuffer, ModelBuffer
from .diagnostics import ConfusionMatrix, trait_confusion
from .loop import Trainer, collect_real, evaluate, run_training
from .metrics import MetricsRow, read_metrics_csv, steps_to_target, write_metrics_csv

__all__ = [
    "run_baseline_ppo",
    "run_mbpo_ablation",
    "EnvBuffer",
    "ModelBuffer",
    "MetricsRow",
    "write_metrics_csv",
    "read_metrics_csv",
    "steps_to_target",
    "ConfusionMatrix",
    "trait_confusion",
    "Trainer",
    "run_training",
    "collect_real",
    "evaluate",
]
