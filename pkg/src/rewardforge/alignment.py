"""Preference data and the trajectory alignment coefficient (TAC).

A reward program induces a preference between two trajectories by
comparing their average rewards. The TAC scores a program against a
store of labeled preferences: +1 is total agreement, −1 total
disagreement, 0 chance level. Programs are pruned by TAC before any
training budget is spent on them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from filelock import FileLock

from .dsl.ast import RewardProgram
from .dsl.evaluator import evaluate_batch
from .env.trajectory import Trajectory
from .schema import OBS_FIELD_NAMES

TIE = "tie"


def _course_fields(traj: Trajectory, course_fields: dict | None) -> dict:
    if course_fields is not None:
        return course_fields
    fields = traj.metadata.get("course_fields")
    if fields is None:
        raise ValueError(
            "trajectory metadata lacks course_fields; pass course_fields explicitly"
        )
    return fields


def step_totals(
    traj: Trajectory, program: RewardProgram, course_fields: dict | None = None
) -> np.ndarray:
    """Weighted total reward at every record (record 0 pairs with itself)."""
    fields = _course_fields(traj, course_fields)
    prev_rows = np.vstack([traj.obs[:1], traj.obs[:-1]])
    cur = {n: traj.obs[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
    prev = {n: prev_rows[:, i] for i, n in enumerate(OBS_FIELD_NAMES)}
    return evaluate_batch(program, cur, prev, fields).total


def avg_reward(
    traj: Trajectory, program: RewardProgram, course_fields: dict | None = None
) -> float:
    """G(τ, R): mean weighted total reward over the trajectory."""
    return float(step_totals(traj, program, course_fields).mean())


def induced_pref(
    program: RewardProgram,
    traj_i: Trajectory,
    traj_j: Trajectory,
    course_fields: dict | None = None,
):
    """0 if τ_i preferred, 1 if τ_j preferred, TIE on exact equality."""
    g_i = avg_reward(traj_i, program, course_fields)
    g_j = avg_reward(traj_j, program, course_fields)
    if g_i > g_j:
        return 0
    if g_i < g_j:
        return 1
    return TIE


@dataclass(frozen=True)
class PreferenceRecord:
    """One labeled pair; p = 0 means traj_i was preferred."""

    p: int
    traj_i: str  # content-hash refs into the store's trajectory directory
    traj_j: str
    judge_id: str
    iteration: int
    created_at: str

    def __post_init__(self):
        if self.p not in (0, 1):
            raise ValueError("p must be 0 or 1")
        if self.traj_i == self.traj_j:
            raise ValueError("a preference must compare two distinct trajectories")

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "traj_i": self.traj_i,
            "traj_j": self.traj_j,
            "judge_id": self.judge_id,
            "iteration": self.iteration,
            "created_at": self.created_at,
        }

    @staticmethod
    def from_json(doc: dict) -> "PreferenceRecord":
        return PreferenceRecord(
            p=int(doc["p"]),
            traj_i=doc["traj_i"],
            traj_j=doc["traj_j"],
            judge_id=doc["judge_id"],
            iteration=int(doc["iteration"]),
            created_at=doc["created_at"],
        )


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


class PreferenceStore:
    """Append-only preferences.jsonl plus content-addressed trajectories.

    Single writer (guarded by a lock file), any number of readers.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.path = self.root / "preferences.jsonl"
        self.traj_dir = self.root / "trajectories"
        self.traj_dir.mkdir(exist_ok=True)
        self._lock = FileLock(str(self.path) + ".lock")

    def __len__(self) -> int:
        return len(self.records())

    def add(self, record: PreferenceRecord) -> None:
        for ref in (record.traj_i, record.traj_j):
            if not (self.traj_dir / f"{ref}.traj").exists():
                raise ValueError(f"unknown trajectory ref {ref!r}")
        with self._lock:
            with self.path.open("a") as fh:
                fh.write(json.dumps(record.to_json()) + "\n")

    def records(self) -> list[PreferenceRecord]:
        if not self.path.exists():
            return []
        with self.path.open() as fh:
            return [PreferenceRecord.from_json(json.loads(line)) for line in fh if line.strip()]

    def add_trajectory(self, traj: Trajectory) -> str:
        with self._lock:
            return traj.save(self.traj_dir)

    def trajectory(self, ref: str) -> Trajectory:
        return Trajectory.load(self.traj_dir, ref)

    def has_trajectory(self, ref: str) -> bool:
        return (self.traj_dir / f"{ref}.traj").exists()

    def labeled_by(self, judge_id: str, traj_i: str, traj_j: str) -> bool:
        """True if this judge already labeled this unordered pair."""
        pair = {traj_i, traj_j}
        return any(
            r.judge_id == judge_id and {r.traj_i, r.traj_j} == pair
            for r in self.records()
        )


def tac(
    program: RewardProgram,
    store: PreferenceStore,
    records: list[PreferenceRecord] | None = None,
) -> float:
    """σ = (2P − |D|)/|D|; induced ties credit 0.5; empty store → 0.

    `records` restricts the dataset to a subset of the store's records
    (trajectories still resolve through the store).
    """
    if records is None:
        records = store.records()
    if not records:
        return 0.0
    g_cache: dict[str, float] = {}

    def g(ref: str) -> float:
        if ref not in g_cache:
            g_cache[ref] = avg_reward(store.trajectory(ref), program)
        return g_cache[ref]

    agreement = 0.0
    for rec in records:
        g_i, g_j = g(rec.traj_i), g(rec.traj_j)
        if g_i == g_j:
            agreement += 0.5
        else:
            induced = 0 if g_i > g_j else 1
            agreement += 1.0 if induced == rec.p else 0.0
    n = len(records)
    return (2.0 * agreement - n) / n


@dataclass(frozen=True)
class ScoredProgram:
    index: int  # original generation order
    program: RewardProgram
    sigma: float


def top_n_filter(
    programs: list[RewardProgram], store: PreferenceStore, n: int
) -> list[ScoredProgram]:
    """Keep the n best-aligned programs; ties keep generation order."""
    if n > len(programs):
        raise ValueError("n exceeds the number of candidate programs")
    scored = [
        ScoredProgram(index=i, program=p, sigma=tac(p, store))
        for i, p in enumerate(programs)
    ]
    scored.sort(key=lambda s: (-s.sigma, s.index))
    return scored[:n]
