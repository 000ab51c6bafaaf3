"""Agent trajectories: fixed-tick (observation, action) records.

Stored compactly as arrays (schema field order) with dict views for the
DSL evaluator.  On disk: versioned length-prefixed binary records plus a
JSON metadata sidecar; files are content-addressed by sha256 of the
binary payload.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..schema import OBS_FIELD_NAMES

MAGIC = b"RFTJ"
FORMAT_VERSION = 1

ACTION_FIELD_NAMES = ("steering_rate", "throttle")


@dataclass(frozen=True)
class Action:
    steering_rate: float
    throttle: float

    def clamped(self) -> "Action":
        return Action(
            min(1.0, max(-1.0, self.steering_rate)),
            min(1.0, max(-1.0, self.throttle)),
        )


@dataclass
class Trajectory:
    obs: np.ndarray  # (T, len(OBS_FIELD_NAMES)) float64, schema field order
    actions: np.ndarray  # (T, 2) float64: steering_rate, throttle
    dt: float
    seed: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.obs = np.ascontiguousarray(self.obs, dtype=np.float64)
        self.actions = np.ascontiguousarray(self.actions, dtype=np.float64)
        if self.obs.ndim != 2 or self.obs.shape[1] != len(OBS_FIELD_NAMES):
            raise ValueError("obs must be (T, n_fields)")
        if self.actions.shape != (len(self.obs), len(ACTION_FIELD_NAMES)):
            raise ValueError("actions must be (T, 2)")
        if len(self.obs) == 0:
            raise ValueError("trajectory must contain at least one record")
        t = self.columns()["time"]
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("record times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.obs)

    @property
    def duration(self) -> float:
        return len(self) * self.dt

    def columns(self) -> dict[str, np.ndarray]:
        """Read-only per-field views, keyed by schema field name."""
        return {name: self.obs[:, k] for k, name in enumerate(OBS_FIELD_NAMES)}

    def obs_dict(self, t: int) -> dict[str, float]:
        row = self.obs[t]
        return {name: float(row[k]) for k, name in enumerate(OBS_FIELD_NAMES)}

    def action(self, t: int) -> Action:
        return Action(float(self.actions[t, 0]), float(self.actions[t, 1]))

    def records(self):
        for t in range(len(self)):
            yield self.obs_dict(t), self.action(t)

    # serialization ------------------------------------------------------
    def to_bytes(self) -> bytes:
        T, obs_dim = self.obs.shape
        head = MAGIC + struct.pack(
            "<IIIIdq", FORMAT_VERSION, T, obs_dim, self.actions.shape[1],
            self.dt, self.seed,
        )
        out = [head]
        rec_len = (obs_dim + self.actions.shape[1]) * 8
        for t in range(T):
            out.append(struct.pack("<I", rec_len))
            out.append(self.obs[t].tobytes())
            out.append(self.actions[t].tobytes())
        return b"".join(out)

    @staticmethod
    def from_bytes(blob: bytes, metadata: dict | None = None) -> "Trajectory":
        if blob[:4] != MAGIC:
            raise ValueError("not a trajectory blob")
        version, T, obs_dim, act_dim, dt, seed = struct.unpack_from("<IIIIdq", blob, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported trajectory format version {version}")
        off = 4 + struct.calcsize("<IIIIdq")
        obs = np.empty((T, obs_dim))
        actions = np.empty((T, act_dim))
        for t in range(T):
            (rec_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            if rec_len != (obs_dim + act_dim) * 8:
                raise ValueError("corrupt record length")
            row = np.frombuffer(blob, dtype="<f8", count=obs_dim + act_dim, offset=off)
            obs[t] = row[:obs_dim]
            actions[t] = row[obs_dim:]
            off += rec_len
        return Trajectory(obs, actions, dt=dt, seed=seed, metadata=metadata or {})

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, directory: Path) -> str:
        """Write <hash>.traj plus <hash>.json sidecar; returns the hash."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        blob = self.to_bytes()
        ref = hashlib.sha256(blob).hexdigest()
        path = directory / f"{ref}.traj"
        if not path.exists():
            path.write_bytes(blob)
            sidecar = {"dt": self.dt, "seed": self.seed, "metadata": self.metadata}
            (directory / f"{ref}.json").write_text(json.dumps(sidecar, indent=1))
        return ref

    @staticmethod
    def load(directory: Path, ref: str) -> "Trajectory":
        directory = Path(directory)
        blob = (directory / f"{ref}.traj").read_bytes()
        sidecar = json.loads((directory / f"{ref}.json").read_text())
        traj = Trajectory.from_bytes(blob, metadata=sidecar.get("metadata", {}))
        traj.dt = float(sidecar["dt"])
        traj.seed = int(sidecar["seed"])
        return traj
