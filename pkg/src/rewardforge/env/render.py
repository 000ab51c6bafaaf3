"""Structured scene descriptions for playback and textual clip judging."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .sim import EnvState

FRAME_HZ = 10  # frames per simulated second, matched by the clip pipeline


@dataclass(frozen=True)
class CarPose:
    index: int
    x: float
    y: float
    heading: float  # world heading, radians
    speed: float
    centerline_progress: float
    lateral_offset: float
    lap: int
    rank: int
    off_course: bool
    collision: bool


@dataclass(frozen=True)
class FrameDescription:
    time: float
    course: str
    agent_index: int
    cars: tuple[CarPose, ...]

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["cars"] = [asdict(c) for c in self.cars]
        return doc

    @staticmethod
    def from_json(doc: dict) -> "FrameDescription":
        return FrameDescription(
            time=float(doc["time"]),
            course=doc["course"],
            agent_index=int(doc["agent_index"]),
            cars=tuple(CarPose(**c) for c in doc["cars"]),
        )


def render_frame(state: EnvState) -> FrameDescription:
    ranks = state.ranks()
    cars = []
    for i in range(state.n_cars):
        x, y = state.world_xy(i)
        heading = state.course.heading_at(float(state.s[i])) + float(state.phi[i])
        cars.append(
            CarPose(
                index=i,
                x=round(float(x), 3),
                y=round(float(y), 3),
                heading=round(float(heading), 4),
                speed=round(float(state.v[i]), 3),
                centerline_progress=round(float(state.s[i]), 3),
                lateral_offset=round(float(state.d[i]), 3),
                lap=state.laps_of(i),
                rank=int(ranks[i]),
                off_course=bool(abs(state.d[i]) > state.course.half_width),
                collision=bool(state.collision[i]),
            )
        )
    return FrameDescription(
        time=float(state.time),
        course=state.course.name,
        agent_index=0,
        cars=tuple(cars),
    )
