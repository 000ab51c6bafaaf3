"""LLM judge: textual clip descriptions, then a final stitched preference.

Both trajectories are capped at the first completed lap (or a wall-clock
cap), resampled to a fixed frame rate, and split into fixed-length
clips. The model first describes each clip pair side by side; the
descriptions are then stitched into one final preference question whose
answer must name agent 1 or agent 2.
"""

from __future__ import annotations

import re
from enum import Enum

import numpy as np

from ..env.trajectory import Trajectory
from ..generation.llm_client import LLMClient, LLMTransportError
from ..schema import OBS_FIELD_NAMES
from .base import JudgeVerdict

FPS = 10
CLIP_SECONDS = 15
MAX_VIDEO_SECONDS = 180.0
CALL_RETRIES = 3

_IDX = {n: i for i, n in enumerate(OBS_FIELD_NAMES)}

# fields a camera would show vs. the full numeric state with controls
_IMAGE_FIELDS = (
    "time", "centerline_progress", "lap", "lateral_offset", "speed",
    "off_course", "collision", "rank", "dist_ahead", "dist_behind",
)
_TRAJECTORY_FIELDS = tuple(OBS_FIELD_NAMES)


class Modality(Enum):
    TRAJECTORY = "trajectory"  # full state rows including control inputs
    IMAGE = "image"  # visually observable fields only
    BOTH = "both"


class JudgeFormatError(Exception):
    """Final preference unparseable even after one reprompt."""


def _fields_for(modality: Modality) -> tuple[str, ...]:
    if modality is Modality.IMAGE:
        return _IMAGE_FIELDS
    return _TRAJECTORY_FIELDS


def capped_rows(traj: Trajectory, max_video_seconds: float) -> np.ndarray:
    """Rows up to the first completed lap or the time cap."""
    time = traj.obs[:, _IDX["time"]]
    lap = traj.obs[:, _IDX["lap"]]
    cap = max_video_seconds
    done = np.flatnonzero(lap >= 1)
    if len(done):
        cap = min(cap, float(time[done[0]]))
    keep = time <= cap + 1e-9
    return traj.obs[keep]


def clip_frames(
    traj: Trajectory,
    fps: int = FPS,
    clip_seconds: int = CLIP_SECONDS,
    max_video_seconds: float = MAX_VIDEO_SECONDS,
) -> list[np.ndarray]:
    """Resample to fps and cut into equal clips (short remainder dropped,
    but a short trajectory still yields one clip)."""
    rows = capped_rows(traj, max_video_seconds)
    stride = max(1, int(round(1.0 / (fps * traj.dt))))
    frames = rows[::stride]
    per_clip = clip_seconds * fps
    n_clips = max(1, len(frames) // per_clip)
    return [frames[k * per_clip : (k + 1) * per_clip] for k in range(n_clips)]


def render_clip(frames: np.ndarray, modality: Modality) -> str:
    fields = _fields_for(modality)
    lines = []
    for row in frames:
        parts = [f"{name}={row[_IDX[name]]:.2f}" for name in fields]
        lines.append(" ".join(parts))
    return "\n".join(lines)


_PREF_RE = re.compile(r"preferred_agent\"?\s*[:=]\s*\"?([12])")

FINAL_FORMAT = 'Answer with exactly ("preferred_agent": 1) or ("preferred_agent": 2).'


def parse_preference(text: str) -> int | None:
    matches = _PREF_RE.findall(text)
    return int(matches[-1]) if matches else None


class LLMJudge:
    def __init__(
        self,
        client: LLMClient,
        modality: Modality = Modality.BOTH,
        fps: int = FPS,
        clip_seconds: int = CLIP_SECONDS,
        max_video_seconds: float = MAX_VIDEO_SECONDS,
    ):
        self.client = client
        self.modality = modality
        self.fps = fps
        self.clip_seconds = clip_seconds
        self.max_video_seconds = max_video_seconds
        self.judge_id = f"llm:{modality.value}"
        self.transcript: list[dict] = []

    def _call(self, kind: str, messages: list[dict]) -> str:
        last: Exception | None = None
        for _ in range(CALL_RETRIES):
            try:
                response = self.client.complete(messages, temperature=0)
                self.transcript.append(
                    {"kind": kind, "messages": messages, "response": response}
                )
                return response
            except LLMTransportError as exc:
                last = exc
        raise LLMTransportError(f"{kind} call failed after {CALL_RETRIES} attempts: {last}")

    def __call__(self, first: Trajectory, second: Trajectory, goal: str) -> JudgeVerdict:
        kwargs = dict(
            fps=self.fps,
            clip_seconds=self.clip_seconds,
            max_video_seconds=self.max_video_seconds,
        )
        clips_a = clip_frames(first, **kwargs)
        clips_b = clip_frames(second, **kwargs)
        n = max(len(clips_a), len(clips_b))
        descriptions = []
        for k in range(n):
            a = render_clip(clips_a[k], self.modality) if k < len(clips_a) else "(no footage: run already over)"
            b = render_clip(clips_b[k], self.modality) if k < len(clips_b) else "(no footage: run already over)"
            messages = [
                {"role": "system", "content": (
                    "You compare two racing agents from telemetry clips sampled at "
                    f"{self.fps} frames per second. Be concrete about speed, line, "
                    "contact, and course limits."
                )},
                {"role": "user", "content": (
                    f"Goal for the agents: {goal}\n\n"
                    f"Clip {k + 1} of {n}.\n\n"
                    f"Agent 1 clip:\n{a}\n\nAgent 2 clip:\n{b}\n\n"
                    "Describe, side by side, how the two agents behave in this clip "
                    "and which behavior better serves the goal."
                )},
            ]
            descriptions.append(self._call("clip", messages))
        stitched = "\n\n".join(
            f"Clip {k + 1}: {text}" for k, text in enumerate(descriptions)
        )
        final_messages = [
            {"role": "system", "content": "You pick the better racing agent. Ties are not allowed."},
            {"role": "user", "content": (
                f"Goal for the agents: {goal}\n\n"
                f"Comparative clip descriptions:\n{stitched}\n\n"
                f"Which agent better serves the goal overall? {FINAL_FORMAT}"
            )},
        ]
        response = self._call("final", final_messages)
        pref = parse_preference(response)
        if pref is None:
            reprompt = final_messages + [
                {"role": "assistant", "content": response},
                {"role": "user", "content": FINAL_FORMAT},
            ]
            response = self._call("reprompt", reprompt)
            pref = parse_preference(response)
            if pref is None:
                raise JudgeFormatError(f"unparseable final preference: {response!r}")
        return JudgeVerdict(preferred=pref - 1, rationale=response)


def llm_judge_pipeline(
    llm_client: LLMClient,
    modality: Modality = Modality.BOTH,
    fps: int = FPS,
    clip_seconds: int = CLIP_SECONDS,
    max_video_seconds: float = MAX_VIDEO_SECONDS,
) -> LLMJudge:
    return LLMJudge(llm_client, modality, fps, clip_seconds, max_video_seconds)
