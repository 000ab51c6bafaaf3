"""Observation → normalized feature vectors for the Q-function.

Centerline progress enters as sin/cos of lap phase (it is cyclic), every
other field is scaled by fixed schema bounds, and the course curvature a
few metres ahead is appended so the policy can anticipate corners.
"""

from __future__ import annotations

import numpy as np

from ..env.course import Course
from ..schema import OBS_FIELD_NAMES

# metres ahead of the car at which upcoming curvature is sampled
CURVATURE_HORIZONS = (0.0, 8.0, 20.0, 40.0)
CURVATURE_SCALE = 12.0  # hairpin |κ| ≈ 0.071 → ~0.86

_IDX = {name: i for i, name in enumerate(OBS_FIELD_NAMES)}

# per-field scale for the plain passthrough features (field, divisor)
_SCALED_FIELDS = (
    ("lateral_offset", 10.0),
    ("speed", 55.0),
    ("heading_error", np.pi),
    ("steering", 1.0),
    ("throttle", 1.0),
    ("off_course", 1.0),
    ("collision", 1.0),
    ("collision_rel_speed", 30.0),
    ("rank", 19.0),
    ("dist_ahead", 250.0),
    ("dist_behind", 250.0),
    ("time", 180.0),
)

FEATURE_NAMES = (
    "progress_sin",
    "progress_cos",
    *(name for name, _ in _SCALED_FIELDS),
    *(f"curvature_{int(h)}m" for h in CURVATURE_HORIZONS),
)


def feature_dim() -> int:
    return len(FEATURE_NAMES)


def features_batch(obs: np.ndarray, course: Course) -> np.ndarray:
    """Vectorized features for an (T, n_fields) observation array."""
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    s = obs[:, _IDX["centerline_progress"]]
    phase = 2.0 * np.pi * s / course.total_length
    cols = [np.sin(phase), np.cos(phase)]
    cols.extend(obs[:, _IDX[name]] / div for name, div in _SCALED_FIELDS)
    ds = course.total_length / course.n_samples
    for horizon in CURVATURE_HORIZONS:
        ahead = (s + horizon) % course.total_length
        idx = np.floor(ahead / ds).astype(int) % course.n_samples
        cols.append(course.curvature[idx] * CURVATURE_SCALE)
    return np.stack(cols, axis=1)


def features_one(obs_row: np.ndarray, course: Course) -> np.ndarray:
    return features_batch(obs_row.reshape(1, -1), course)[0]


def obs_dict_to_row(obs: dict) -> np.ndarray:
    return np.array([obs[name] for name in OBS_FIELD_NAMES], dtype=np.float64)
