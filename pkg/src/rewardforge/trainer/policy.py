"""Discrete-action Q-function policy: one hidden layer, numpy only.

Actions live on a fixed steering_rate × throttle grid; the greedy policy
decodes the argmax cell back into a continuous Action.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..env.trajectory import Action
from .features import FEATURE_NAMES, feature_dim

POLICY_FORMAT_VERSION = 1

STEERING_LEVELS = (-1.0, -0.5, 0.0, 0.5, 1.0)
THROTTLE_LEVELS = (-1.0, 0.0, 0.5, 1.0)

ACTION_GRID = tuple(
    Action(sr, th) for sr in STEERING_LEVELS for th in THROTTLE_LEVELS
)
N_ACTIONS = len(ACTION_GRID)  # 20


def action_from_index(index: int) -> Action:
    return ACTION_GRID[int(index)]


@dataclass
class QPolicy:
    """Single-hidden-layer Q approximator over normalized features."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    course_name: str = ""
    meta: dict = field(default_factory=dict)

    @staticmethod
    def initial(seed: int, hidden: int = 64, course_name: str = "") -> "QPolicy":
        rng = np.random.default_rng(seed)
        n_in = feature_dim()
        w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, hidden))
        w2 = rng.normal(0.0, np.sqrt(1.0 / hidden), (hidden, N_ACTIONS))
        return QPolicy(w1, np.zeros(hidden), w2, np.zeros(N_ACTIONS), course_name)

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    def q_values(self, feats: np.ndarray) -> np.ndarray:
        """(B, n_feat) → (B, N_ACTIONS)."""
        h = np.tanh(feats @ self.w1 + self.b1)
        return h @ self.w2 + self.b2

    def greedy_index(self, feats: np.ndarray) -> np.ndarray:
        return np.argmax(self.q_values(np.atleast_2d(feats)), axis=1)

    def greedy_action(self, feat_row: np.ndarray) -> Action:
        return action_from_index(self.greedy_index(feat_row)[0])

    def parameters(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)

    def copy(self) -> "QPolicy":
        return QPolicy(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
            self.course_name, dict(self.meta),
        )

    def blend_from(self, other: "QPolicy", tau: float) -> None:
        """Polyak update: self ← (1−τ)·self + τ·other."""
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine *= 1.0 - tau
            mine += tau * theirs

    # serialization ------------------------------------------------------
    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.savez(
            buf,
            format_version=np.int64(POLICY_FORMAT_VERSION),
            w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2,
        )
        return buf.getvalue()

    @staticmethod
    def from_bytes(blob: bytes, course_name: str = "", meta: dict | None = None) -> "QPolicy":
        with np.load(io.BytesIO(blob)) as z:
            if int(z["format_version"]) != POLICY_FORMAT_VERSION:
                raise ValueError("unsupported policy format version")
            return QPolicy(
                z["w1"], z["b1"], z["w2"], z["b2"], course_name, dict(meta or {}),
            )

    def save(self, path: Path) -> None:
        """Write <path>.npz blob plus <path>.json metadata."""
        path = Path(path)
        path.with_suffix(".npz").write_bytes(self.to_bytes())
        doc = {
            "format_version": POLICY_FORMAT_VERSION,
            "course": self.course_name,
            "hidden": self.hidden,
            "feature_names": list(FEATURE_NAMES),
            "steering_levels": list(STEERING_LEVELS),
            "throttle_levels": list(THROTTLE_LEVELS),
            **self.meta,
        }
        path.with_suffix(".json").write_text(json.dumps(doc, indent=2))

    @staticmethod
    def load(path: Path) -> "QPolicy":
        path = Path(path)
        doc = json.loads(path.with_suffix(".json").read_text())
        blob = path.with_suffix(".npz").read_bytes()
        meta = {
            k: v
            for k, v in doc.items()
            if k not in {
                "format_version", "course", "hidden", "feature_names",
                "steering_levels", "throttle_levels",
            }
        }
        return QPolicy.from_bytes(blob, course_name=doc.get("course", ""), meta=meta)
