"""Judge protocol and pairwise preference elicitation.

A judge compares two trajectories and must pick one — no ties. The
pairwise driver runs every unordered pair once, with presentation order
randomized per seed so position bias cannot systematically favor one
side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..alignment import PreferenceRecord, utc_now
from ..env.trajectory import Trajectory
from ..generation.llm_client import LLMTransportError

TRANSPORT_RETRIES = 3


@dataclass(frozen=True)
class JudgeVerdict:
    preferred: int  # 0 = first presented, 1 = second presented
    rationale: str = ""

    def __post_init__(self):
        if self.preferred not in (0, 1):
            raise ValueError("verdict must prefer the first or second trajectory")


class Judge(Protocol):
    judge_id: str

    def __call__(self, first: Trajectory, second: Trajectory, goal: str) -> JudgeVerdict: ...


def pairwise_judge(
    judge,
    trajectories: list[Trajectory],
    goal: str,
    iteration: int = 0,
    seed: int = 0,
) -> list[PreferenceRecord]:
    """Elicit one preference per unordered pair — C(N,2) records.

    Records store refs in presentation order: p=0 means the first
    presented trajectory was preferred.
    """
    n = len(trajectories)
    if n < 2:
        raise ValueError("pairwise judging needs at least two trajectories")
    refs = [t.content_hash() for t in trajectories]
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = (i, j) if rng.random() < 0.5 else (j, i)
            verdict = _judge_with_retries(judge, trajectories[a], trajectories[b], goal)
            records.append(
                PreferenceRecord(
                    p=verdict.preferred,
                    traj_i=refs[a],
                    traj_j=refs[b],
                    judge_id=judge.judge_id,
                    iteration=iteration,
                    created_at=utc_now(),
                )
            )
    return records


def _judge_with_retries(judge, first, second, goal) -> JudgeVerdict:
    last: Exception | None = None
    for _ in range(TRANSPORT_RETRIES):
        try:
            return judge(first, second, goal)
        except LLMTransportError as exc:
            last = exc
    raise LLMTransportError(
        f"judge failed after {TRANSPORT_RETRIES} attempts: {last}"
    ) from last
