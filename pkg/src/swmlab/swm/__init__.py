"""Social world model: trait trackers, trait-conditioned dynamics, losses."""

from .dynamics import DynamicsModel, dynamics_predict
from .loss import (
    SwmLossReport,
    elbo_consistency_check,
    eval_one_step_mse,
    swm_loss,
    train_swm,
)
from .rollout import ImaginedRollout, ImaginedStep, imagine_rollout
from .trackers import (
    PosteriorTracker,
    TrackerDims,
    TraitTracker,
    build_posterior_encodings,
    tile_index_onehots,
)

__all__ = [
    "TrackerDims",
    "TraitTracker",
    "PosteriorTracker",
    "build_posterior_encodings",
    "tile_index_onehots",
    "DynamicsModel",
    "dynamics_predict",
    "SwmLossReport",
    "swm_loss",
    "train_swm",
    "eval_one_step_mse",
    "elbo_consistency_check",
    "ImaginedStep",
    "ImaginedRollout",
    "imagine_rollout",
]
