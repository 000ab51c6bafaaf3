"""RL trainer: reward program in, greedy policy + diagnostics + buffer out."""

from .features import FEATURE_NAMES, feature_dim, features_batch, features_one
from .policy import (
    ACTION_GRID,
    N_ACTIONS,
    STEERING_LEVELS,
    THROTTLE_LEVELS,
    QPolicy,
    action_from_index,
)
from .replay import DEFAULT_CAPACITY, DESK_CAPACITY, ReplayBuffer
from .train import (
    Checkpoint,
    Diagnostics,
    EnvConfig,
    TrainResult,
    TrainSettings,
    default_thresholds,
    diagnostics_to_text,
    greedy_policy_fn,
    train,
)

__all__ = [
    "ACTION_GRID",
    "Checkpoint",
    "DEFAULT_CAPACITY",
    "DESK_CAPACITY",
    "Diagnostics",
    "EnvConfig",
    "FEATURE_NAMES",
    "N_ACTIONS",
    "QPolicy",
    "ReplayBuffer",
    "STEERING_LEVELS",
    "THROTTLE_LEVELS",
    "TrainResult",
    "TrainSettings",
    "action_from_index",
    "default_thresholds",
    "diagnostics_to_text",
    "feature_dim",
    "greedy_policy_fn",
    "features_batch",
    "features_one",
    "train",
]
