"""Published observation/course field schema.

Single source of truth for the fields a reward expression may reference,
their ranges, and the documentation text embedded into generation prompts.
The DSL parser validates field references against this schema; the
observation sampler spans these ranges (boundary values included).
"""

from __future__ import annotations

from dataclasses import dataclass

# Cap applied to gap-to-opponent distances when no opponent is in range.
DIST_CAP = 250.0

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str  # "float" | "bool" | "int"
    lo: float
    hi: float
    doc: str
    # Values the validation sampler must exercise in addition to uniform draws.
    boundaries: tuple[float, ...] = ()


OBS_FIELDS: tuple[FieldSpec, ...] = (
    FieldSpec(
        "centerline_progress", "float", 0.0, 1000.0,
        "Distance travelled along the track centerline within the current lap,"
        " in meters. Monotone during a lap and wraps back to 0 at the start line.",
        boundaries=(0.0,),
    ),
    FieldSpec(
        "lap", "int", 0.0, 50.0,
        "Number of completed laps (0 at the start of the race).",
        boundaries=(0.0,),
    ),
    FieldSpec(
        "lateral_offset", "float", -10.0, 10.0,
        "Signed distance in meters from the car center to the track centerline;"
        " positive is left of the centerline.",
        boundaries=(-10.0, 10.0, 0.0),
    ),
    FieldSpec(
        "speed", "float", 0.0, 100.0,
        "Car speed in m/s. Never negative.",
        boundaries=(0.0,),
    ),
    FieldSpec(
        "heading_error", "float", -3.14159265, 3.14159265,
        "Angle in radians between the car heading and the centerline tangent.",
        boundaries=(0.0,),
    ),
    FieldSpec(
        "steering", "float", -1.0, 1.0,
        "Current normalized steering position in [-1, 1].",
        boundaries=(-1.0, 1.0),
    ),
    FieldSpec(
        "throttle", "float", -1.0, 1.0,
        "Current normalized throttle in [-1, 1]; negative values brake.",
        boundaries=(-1.0, 1.0),
    ),
    FieldSpec(
        "off_course", "bool", 0.0, 1.0,
        "1.0 when the car center is outside the legal racing area"
        " (|lateral_offset| > course.half_width), else 0.0. Note this is a"
        " simplification: the boundary rule is applied to the car center point,"
        " not the individual tires.",
    ),
    FieldSpec(
        "collision", "bool", 0.0, 1.0,
        "1.0 while the car is in contact with another car, else 0.0.",
    ),
    FieldSpec(
        "collision_rel_speed", "float", 0.0, 100.0,
        "Magnitude in m/s of the relative velocity against the contacted car."
        " Exactly 0.0 whenever collision is 0.0.",
        boundaries=(0.0,),
    ),
    FieldSpec(
        "rank", "int", 0.0, 19.0,
        "Current race position among all cars, 0-based: 0 is first place.",
        boundaries=(0.0, 19.0),
    ),
    FieldSpec(
        "dist_ahead", "float", 0.0, DIST_CAP,
        f"Track distance in meters to the nearest opponent ahead, capped at"
        f" {DIST_CAP:.0f} (cap value also used when no opponent is ahead).",
        boundaries=(0.0, DIST_CAP),
    ),
    FieldSpec(
        "dist_behind", "float", 0.0, DIST_CAP,
        f"Track distance in meters to the nearest opponent behind, capped at"
        f" {DIST_CAP:.0f} (cap value also used when no opponent is behind).",
        boundaries=(0.0, DIST_CAP),
    ),
    FieldSpec(
        "time", "float", 0.0, 3600.0,
        "Seconds elapsed since the race start.",
        boundaries=(0.0,),
    ),
)

COURSE_FIELDS: tuple[FieldSpec, ...] = (
    FieldSpec(
        "total_length", "float", 100.0, 10000.0,
        "Total centerline length of the closed course, in meters.",
    ),
    FieldSpec(
        "half_width", "float", 2.0, 20.0,
        "Half of the legal track width in meters; the car is off course when"
        " |lateral_offset| exceeds this.",
    ),
)

OBS_FIELD_NAMES: tuple[str, ...] = tuple(f.name for f in OBS_FIELDS)
COURSE_FIELD_NAMES: tuple[str, ...] = tuple(f.name for f in COURSE_FIELDS)

# Fields a reward expression may reference, per source prefix.
DSL_SOURCES: dict[str, tuple[str, ...]] = {
    "cur": OBS_FIELD_NAMES,
    "prev": OBS_FIELD_NAMES,
    "course": COURSE_FIELD_NAMES,
}


def field_spec(source: str, name: str) -> FieldSpec:
    fields = OBS_FIELDS if source in ("cur", "prev") else COURSE_FIELDS
    for f in fields:
        if f.name == name:
            return f
    raise KeyError(f"{source}.{name}")


def schema_doc() -> str:
    """Render the schema as the text document embedded in prompts.

    This exact text is what generation prompts show the model; keep it in
    sync with docs/schema.txt (test-enforced).
    """
    lines = [
        f"# Observation and course fields (schema v{SCHEMA_VERSION})",
        "#",
        "# Reward expressions may read three record sources:",
        "#   cur    - the observation at the current step",
        "#   prev   - the observation at the previous step",
        "#   course - static properties of the track",
        "#",
        "# Boolean fields read as 1.0 (true) or 0.0 (false).",
        "",
        "cur / prev fields:",
    ]
    for f in OBS_FIELDS:
        lines.append(f"  {f.name} ({f.kind}): {f.doc}")
    lines.append("")
    lines.append("course fields:")
    for f in COURSE_FIELDS:
        lines.append(f"  {f.name} ({f.kind}): {f.doc}")
    lines.append("")
    return "\n".join(lines)
