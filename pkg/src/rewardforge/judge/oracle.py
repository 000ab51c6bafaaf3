"""Fitness-based judges: a ground-truth oracle and a noisy variant.

These exist for testing and controlled experiments — the production
pipeline assumes no fitness function is available and judges behavior
from trajectories alone.
"""

from __future__ import annotations

import numpy as np

from ..env.metrics import Thresholds, metrics
from ..env.trajectory import Trajectory
from .base import JudgeVerdict


def race_fitness(traj: Trajectory, thresholds: Thresholds):
    """Higher is better: negated final place (after disqualification),
    ties broken by less time spent colliding."""
    m, _ = metrics(traj, thresholds)
    return (-m.final_place, -m.car_collision_time)


class OracleJudge:
    def __init__(self, fitness_fn=None, thresholds: Thresholds | None = None):
        self.thresholds = thresholds or _default_thresholds()
        self.fitness_fn = fitness_fn or (lambda t: race_fitness(t, self.thresholds))
        self.judge_id = "oracle"

    def __call__(self, first: Trajectory, second: Trajectory, goal: str) -> JudgeVerdict:
        f_first, f_second = self.fitness_fn(first), self.fitness_fn(second)
        # no ties allowed: exact equality defaults to the first presented
        preferred = 1 if f_second > f_first else 0
        return JudgeVerdict(
            preferred=preferred,
            rationale=f"fitness {f_first!r} vs {f_second!r}",
        )


class NoisyOracleJudge:
    """Oracle verdicts flipped independently with a fixed probability."""

    def __init__(
        self,
        flip_prob: float,
        seed: int,
        fitness_fn=None,
        thresholds: Thresholds | None = None,
    ):
        if not 0.0 <= flip_prob <= 0.5:
            raise ValueError("flip_prob must be within [0, 0.5]")
        self.oracle = OracleJudge(fitness_fn, thresholds)
        self.flip_prob = flip_prob
        self.rng = np.random.default_rng(seed)
        self.judge_id = f"noisy-oracle:{flip_prob:g}"

    def __call__(self, first: Trajectory, second: Trajectory, goal: str) -> JudgeVerdict:
        verdict = self.oracle(first, second, goal)
        if self.rng.random() < self.flip_prob:
            return JudgeVerdict(
                preferred=1 - verdict.preferred,
                rationale=verdict.rationale + " (flipped)",
            )
        return verdict


def oracle_judge(fitness_fn=None, thresholds: Thresholds | None = None) -> OracleJudge:
    return OracleJudge(fitness_fn, thresholds)


def noisy_oracle_judge(
    flip_prob: float, seed: int, fitness_fn=None, thresholds: Thresholds | None = None
) -> NoisyOracleJudge:
    return NoisyOracleJudge(flip_prob, seed, fitness_fn, thresholds)


def _default_thresholds() -> Thresholds:
    from ..trainer.train import default_thresholds

    return default_thresholds()
