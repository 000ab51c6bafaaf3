"""Transition ring buffer with n-step window sampling.

Rows store raw observations plus the per-component (unweighted) reward
values, so a buffer recorded under one reward program can be re-scored
under any other — that is what makes last iteration's buffer reusable as
a secondary buffer.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from ..dsl.ast import RewardProgram
from ..dsl.evaluator import evaluate_batch
from ..schema import OBS_FIELD_NAMES

BUFFER_FORMAT_VERSION = 1
DEFAULT_CAPACITY = 1_000_000
DESK_CAPACITY = 100_000

_N_FIELDS = len(OBS_FIELD_NAMES)


class ReplayBuffer:
    def __init__(self, capacity: int, component_names: tuple[str, ...]):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.component_names = tuple(component_names)
        n_comp = len(self.component_names)
        self.obs = np.zeros((capacity, _N_FIELDS))
        self.action = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros((capacity, n_comp))
        self.next_obs = np.zeros((capacity, _N_FIELDS))
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._head = 0  # next physical write slot

    def __len__(self) -> int:
        return self.size

    def push_batch(
        self,
        obs: np.ndarray,
        action: np.ndarray,
        rewards: np.ndarray,
        next_obs: np.ndarray,
        done: np.ndarray,
    ) -> None:
        n = len(action)
        if n > self.capacity:  # FIFO: only the newest rows can survive
            cut = n - self.capacity
            obs, action, rewards = obs[cut:], action[cut:], rewards[cut:]
            next_obs, done = next_obs[cut:], done[cut:]
            n = self.capacity
        slots = (self._head + np.arange(n)) % self.capacity
        self.obs[slots] = obs
        self.action[slots] = action
        self.rewards[slots] = rewards
        self.next_obs[slots] = next_obs
        self.done[slots] = done
        self._head = int((self._head + n) % self.capacity)
        self.size = min(self.capacity, self.size + n)

    def _physical(self, logical: np.ndarray) -> np.ndarray:
        oldest = (self._head - self.size) % self.capacity
        return (oldest + logical) % self.capacity

    def sample_windows(
        self,
        rng: np.random.Generator,
        batch: int,
        n_step: int,
        gamma: float,
        weights: np.ndarray,
    ) -> dict[str, np.ndarray]:
        """Uniform window starts; windows truncate at episode ends and at
        the newest transition. Returns the n-step learning tuple."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        start = rng.integers(0, self.size, size=batch)
        offsets = np.arange(n_step)
        logical = start[:, None] + offsets[None, :]
        valid = logical < self.size
        phys = self._physical(np.minimum(logical, self.size - 1))
        done_w = self.done[phys] & valid
        # alive at offset k iff no done strictly before k in the window
        done_before = np.cumsum(done_w, axis=1) - done_w
        alive = valid & (done_before == 0)
        steps = alive.sum(axis=1)  # ≥ 1: offset 0 is always alive
        last = steps - 1
        rows = np.arange(batch)
        total_r = self.rewards[phys] @ weights  # (B, n_step) weighted totals
        discounts = gamma ** offsets
        returns = (total_r * discounts * alive).sum(axis=1)
        last_phys = phys[rows, last]
        return {
            "obs": self.obs[self._physical(start)],
            "action": self.action[self._physical(start)],
            "returns": returns,
            "bootstrap_obs": self.next_obs[last_phys],
            "bootstrap_scale": (gamma ** steps) * ~self.done[last_phys],
        }

    def rescored(self, program: RewardProgram, course_fields: dict[str, float]) -> "ReplayBuffer":
        """Copy with reward columns recomputed under a different program.

        Transition rewards pair cur=next_obs with prev=obs. Raises
        EvalError (with the faulting component) if the program faults on
        any stored observation.
        """
        out = ReplayBuffer(self.capacity, program.component_names)
        out.size, out._head = self.size, self._head
        out.obs = self.obs.copy()
        out.action = self.action.copy()
        out.next_obs = self.next_obs.copy()
        out.done = self.done.copy()
        out.rewards = np.zeros((self.capacity, len(program.component_names)))
        if self.size:
            phys = self._physical(np.arange(self.size))
            cur = {n: self.next_obs[phys, i] for i, n in enumerate(OBS_FIELD_NAMES)}
            prev = {n: self.obs[phys, i] for i, n in enumerate(OBS_FIELD_NAMES)}
            result = evaluate_batch(program, cur, prev, course_fields)
            for c, name in enumerate(program.component_names):
                out.rewards[phys, c] = result.per_component[name]
        return out

    # serialization ------------------------------------------------------
    def to_bytes(self) -> bytes:
        phys = self._physical(np.arange(self.size))
        buf = io.BytesIO()
        np.savez_compressed(
            buf,
            format_version=np.int64(BUFFER_FORMAT_VERSION),
            capacity=np.int64(self.capacity),
            component_names=np.array(self.component_names, dtype=np.bytes_),
            obs=self.obs[phys],
            action=self.action[phys],
            rewards=self.rewards[phys],
            next_obs=self.next_obs[phys],
            done=self.done[phys],
        )
        return buf.getvalue()

    @staticmethod
    def from_bytes(blob: bytes) -> "ReplayBuffer":
        with np.load(io.BytesIO(blob)) as z:
            if int(z["format_version"]) != BUFFER_FORMAT_VERSION:
                raise ValueError("unsupported buffer format version")
            names = tuple(x.decode() for x in z["component_names"])
            out = ReplayBuffer(int(z["capacity"]), names)
            n = len(z["action"])
            out.push_batch(z["obs"], z["action"], z["rewards"], z["next_obs"], z["done"])
            assert out.size == n
            return out

    def save(self, path: Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @staticmethod
    def load(path: Path) -> "ReplayBuffer":
        return ReplayBuffer.from_bytes(Path(path).read_bytes())
