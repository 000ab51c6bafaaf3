"""Deterministic 2D multi-car racing environment."""

from .course import Course, CourseSpec, load_course_file, make_course
from .metrics import RaceMetrics, Thresholds, metrics
from .render import FRAME_HZ, CarPose, FrameDescription, render_frame
from .sim import (
    EnvState,
    EpisodeConfig,
    centerline_controller,
    opponent_policy,
    reset,
    rollout,
    step,
)
from .trajectory import Action, Trajectory

__all__ = [
    "Course",
    "CourseSpec",
    "load_course_file",
    "make_course",
    "RaceMetrics",
    "Thresholds",
    "metrics",
    "FRAME_HZ",
    "CarPose",
    "FrameDescription",
    "render_frame",
    "EnvState",
    "EpisodeConfig",
    "centerline_controller",
    "opponent_policy",
    "reset",
    "rollout",
    "step",
    "Action",
    "Trajectory",
]
