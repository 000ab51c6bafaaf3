"""Closed 2D courses built from analytic straight/arc segments.

Layouts are closed by construction: every layout is a stadium (two equal
straights joined by two 180-degree arcs of equal radius), optionally with
chicanes spliced into the straights.  A chicane (arc left a, arc right 2a,
arc left a, equal radii) is point-symmetric about its midpoint, so it
advances the path straight ahead by a computable length and preserves both
heading and lateral position — splicing it in place of an equal-length
straight chunk keeps the loop closed exactly.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

SAMPLE_SPACING = 1.0  # target arc-length between centerline samples, meters

COURSE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CourseSpec:
    layout: str  # "oval" | "s_curve" | "maggiore_like"
    half_width: float = 6.0
    scale: float = 1.0

    def to_json(self) -> dict:
        return {"layout": self.layout, "half_width": self.half_width, "scale": self.scale}

    @staticmethod
    def from_json(doc: dict) -> "CourseSpec":
        return CourseSpec(
            layout=doc["layout"],
            half_width=float(doc.get("half_width", 6.0)),
            scale=float(doc.get("scale", 1.0)),
        )


@dataclass(frozen=True)
class Course:
    name: str
    points: np.ndarray  # (n, 2) world positions at uniform arc-length samples
    headings: np.ndarray  # (n,) cumulative tangent angle, unwrapped (radians)
    curvature: np.ndarray  # (n,) signed curvature, 1/m (+ is left)
    total_length: float
    half_width: float

    def __post_init__(self):
        if self.total_length <= 0 or self.half_width <= 0:
            raise ValueError("total_length and half_width must be positive")
        gap = float(np.hypot(*(self.points[0] - self.points[-1])))
        if gap > 2 * SAMPLE_SPACING:
            raise ValueError(f"course is not closed (endpoint gap {gap:.3f} m)")

    @property
    def n_samples(self) -> int:
        return len(self.points)

    def _locate(self, s: float) -> tuple[int, int, float]:
        ds = self.total_length / self.n_samples
        u = (s % self.total_length) / ds
        i = int(u) % self.n_samples
        return i, (i + 1) % self.n_samples, u - int(u)

    def point_at(self, s: float) -> np.ndarray:
        i, j, frac = self._locate(s)
        if j == 0:
            # interpolate across the closure gap toward the first sample
            return self.points[i] + frac * (self.points[0] - self.points[i])
        return self.points[i] + frac * (self.points[j] - self.points[i])

    def heading_at(self, s: float) -> float:
        i, j, frac = self._locate(s)
        if j == 0:
            end = self.headings[0] + 2.0 * math.pi * _turn_sign(self.headings)
            return float(self.headings[i] + frac * (end - self.headings[i]))
        return float(self.headings[i] + frac * (self.headings[j] - self.headings[i]))

    def curvature_at(self, s: float) -> float:
        i, _, _ = self._locate(s)
        return float(self.curvature[i])

    def world_pos(self, s: float, d: float) -> np.ndarray:
        """Centerline point offset laterally by d (positive = left)."""
        p = self.point_at(s)
        h = self.heading_at(s)
        return p + d * np.array([-math.sin(h), math.cos(h)])

    def fields(self) -> dict[str, float]:
        """Static fields exposed to reward expressions as `course.*`."""
        return {"total_length": self.total_length, "half_width": self.half_width}

    # serialization ------------------------------------------------------
    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.savez(
            buf,
            format_version=np.int64(COURSE_FORMAT_VERSION),
            name=np.bytes_(self.name.encode()),
            points=self.points,
            headings=self.headings,
            curvature=self.curvature,
            total_length=np.float64(self.total_length),
            half_width=np.float64(self.half_width),
        )
        return buf.getvalue()

    @staticmethod
    def from_bytes(blob: bytes) -> "Course":
        with np.load(io.BytesIO(blob)) as z:
            if int(z["format_version"]) != COURSE_FORMAT_VERSION:
                raise ValueError("unsupported course format version")
            return Course(
                name=bytes(z["name"]).decode(),
                points=z["points"],
                headings=z["headings"],
                curvature=z["curvature"],
                total_length=float(z["total_length"]),
                half_width=float(z["half_width"]),
            )


def _turn_sign(headings: np.ndarray) -> float:
    return 1.0 if headings[-1] >= headings[0] else -1.0


# ---------------------------------------------------------------------------
# segment construction


@dataclass(frozen=True)
class _Straight:
    length: float

    def curvature(self) -> float:
        return 0.0


@dataclass(frozen=True)
class _Arc:
    radius: float
    angle: float  # signed, radians; + turns left

    @property
    def length(self) -> float:
        return self.radius * abs(self.angle)

    def curvature(self) -> float:
        return math.copysign(1.0 / self.radius, self.angle)


_Segment = _Straight | _Arc


def _chicane(radius: float, angle: float) -> tuple[list[_Segment], float]:
    """Left/right/left S-bend with zero net heading and lateral change.

    Returns the segments and the straight-line advance they replace.
    """
    segs: list[_Segment] = [
        _Arc(radius, angle),
        _Arc(radius, -2.0 * angle),
        _Arc(radius, angle),
    ]
    # net advance along the original heading, from the point symmetry of
    # the middle arc: integrate heading over the three arcs
    advance = 2.0 * radius * math.sin(angle) + 2.0 * radius * math.sin(angle)
    return segs, advance


def _straight_with_chicane(
    length: float, lead: float, radius: float, angle: float
) -> list[_Segment]:
    segs, advance = _chicane(radius, angle)
    tail = length - lead - advance
    if tail <= 0:
        raise ValueError("straight too short for the requested chicane")
    return [_Straight(lead), *segs, _Straight(tail)]


def _sample_segments(name: str, segments: list[_Segment], half_width: float) -> Course:
    total = sum(seg.length for seg in segments)
    n = max(8, int(round(total / SAMPLE_SPACING)))
    ds = total / n
    points = np.empty((n, 2))
    headings = np.empty(n)
    curvature = np.empty(n)

    x, y, h = 0.0, 0.0, 0.0
    seg_iter = iter(segments)
    seg = next(seg_iter)
    remaining = seg.length
    for i in range(n):
        points[i] = (x, y)
        headings[i] = h
        curvature[i] = seg.curvature()
        step = ds
        while step > 0:
            take = min(step, remaining)
            if isinstance(seg, _Straight):
                x += take * math.cos(h)
                y += take * math.sin(h)
            else:
                dh = math.copysign(take / seg.radius, seg.angle)
                # rotate the position about the arc center, which sits
                # perpendicular to the heading (left for +angle)
                sign = math.copysign(1.0, seg.angle)
                cx = x - sign * seg.radius * math.sin(h)
                cy = y + sign * seg.radius * math.cos(h)
                cos_dh, sin_dh = math.cos(dh), math.sin(dh)
                rx, ry = x - cx, y - cy
                x = cx + rx * cos_dh - ry * sin_dh
                y = cy + rx * sin_dh + ry * cos_dh
                h += dh
            remaining -= take
            step -= take
            if remaining <= 1e-12:
                try:
                    seg = next(seg_iter)
                    remaining = seg.length
                except StopIteration:
                    remaining = math.inf  # final rounding slack
    return Course(
        name=name,
        points=points,
        headings=headings,
        curvature=curvature,
        total_length=total,
        half_width=half_width,
    )


def _oval_segments(scale: float) -> list[_Segment]:
    # straights sized so the unscaled lap is exactly 400 m
    radius = 30.0 * scale
    straight = (200.0 - 30.0 * math.pi) * scale
    return [
        _Straight(straight),
        _Arc(radius, math.pi),
        _Straight(straight),
        _Arc(radius, math.pi),
    ]


def _s_curve_segments(scale: float) -> list[_Segment]:
    radius = 30.0 * scale
    straight = 130.0 * scale
    chicane = _straight_with_chicane(
        straight, lead=35.0 * scale, radius=20.0 * scale, angle=math.radians(35)
    )
    return [
        *chicane,
        _Arc(radius, math.pi),
        _Straight(straight),
        _Arc(radius, math.pi),
    ]


def _maggiore_like_segments(scale: float) -> list[_Segment]:
    # two hairpins joined by long straights; one straight carries a fast
    # chicane, the other a slower one — mixed curvature + >=80 m flat run
    hairpin = 14.0 * scale
    straight = 210.0 * scale
    front = _straight_with_chicane(
        straight, lead=120.0 * scale, radius=20.0 * scale, angle=math.radians(40)
    )
    back = _straight_with_chicane(
        straight, lead=40.0 * scale, radius=25.0 * scale, angle=math.radians(30)
    )
    return [
        *front,
        _Arc(hairpin, math.pi),
        *back,
        _Arc(hairpin, math.pi),
    ]


_LAYOUTS = {
    "oval": _oval_segments,
    "s_curve": _s_curve_segments,
    "maggiore_like": _maggiore_like_segments,
}

LAYOUT_NAMES = tuple(sorted(_LAYOUTS))


def make_course(spec: CourseSpec) -> Course:
    if spec.layout not in _LAYOUTS:
        raise ValueError(
            f"unknown layout {spec.layout!r} (available: {', '.join(LAYOUT_NAMES)})"
        )
    if spec.scale <= 0:
        raise ValueError("scale must be positive")
    segments = _LAYOUTS[spec.layout](spec.scale)
    return _sample_segments(spec.layout, segments, spec.half_width)


def load_course_file(path) -> Course:
    with open(path) as fh:
        return make_course(CourseSpec.from_json(json.load(fh)))
