"""Race metrics and the disqualification rule."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .trajectory import Trajectory


@dataclass(frozen=True)
class Thresholds:
    max_collision_time: float  # seconds of car contact before disqualification
    max_course_out_time: float  # seconds off course before disqualification

    def __post_init__(self):
        if self.max_collision_time < 0 or self.max_course_out_time < 0:
            raise ValueError("thresholds must be non-negative")

    def to_json(self) -> dict:
        return {
            "max_collision_time": self.max_collision_time,
            "max_course_out_time": self.max_course_out_time,
        }

    @staticmethod
    def from_json(doc: dict) -> "Thresholds":
        return Thresholds(
            max_collision_time=float(doc["max_collision_time"]),
            max_course_out_time=float(doc["max_course_out_time"]),
        )

    @staticmethod
    def load(path) -> "Thresholds":
        return Thresholds.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RaceMetrics:
    final_place: int  # 0-based; overwritten to last on disqualification
    car_collision_time: float
    course_out_time: float
    laps_completed: int
    dist_to_first: float


def metrics(trajectory: Trajectory, thresholds: Thresholds) -> tuple[RaceMetrics, bool]:
    """Aggregate per-tick flags; disqualification forces last place."""
    cols = trajectory.columns()
    collision_time = float(cols["collision"].sum()) * trajectory.dt
    course_out_time = float(cols["off_course"].sum()) * trajectory.dt
    meta = trajectory.metadata
    n_cars = int(meta.get("n_cars", int(cols["rank"].max()) + 1))
    raw_place = int(meta.get("final_rank", cols["rank"][-1]))
    laps = int(meta.get("laps_completed", cols["lap"][-1]))
    dist_to_first = float(meta.get("final_dist_to_first", 0.0))
    disqualified = (
        collision_time > thresholds.max_collision_time
        or course_out_time > thresholds.max_course_out_time
    )
    place = n_cars - 1 if disqualified else raw_place
    return (
        RaceMetrics(
            final_place=place,
            car_collision_time=round(collision_time, 9),
            course_out_time=round(course_out_time, 9),
            laps_completed=laps,
            dist_to_first=dist_to_first,
        ),
        disqualified,
    )
