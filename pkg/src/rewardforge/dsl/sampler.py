"""Random schema-conforming observation pairs for runnability validation.

The first few samples sweep declared boundary values (zero speed, extreme
lateral offset, collision engaged) so singular expressions fault
deterministically regardless of seed; the rest are uniform draws with
per-field boundary injection.
"""

from __future__ import annotations

import numpy as np

from ..schema import COURSE_FIELDS, OBS_FIELDS, FieldSpec

_BOUNDARY_PROB = 0.15
_COLLISION_PROB = 0.3

# Number of leading samples that deterministically sweep boundary values.
_SWEEP = 1 + max(len(f.boundaries) for f in OBS_FIELDS)

Obs = dict[str, float]


class ObservationSampler:
    """Draws (cur, prev, course) triples spanning the schema ranges."""

    def __init__(self, seed: int, course: Obs | None = None):
        self.rng = np.random.default_rng(seed)
        if course is None:
            course = {
                f.name: float(self.rng.uniform(f.lo, f.hi)) for f in COURSE_FIELDS
            }
        self.course = dict(course)
        self._index = 0

    def _field_value(self, f: FieldSpec, sweep_slot: int | None) -> float:
        if sweep_slot is not None and f.boundaries:
            value = f.boundaries[sweep_slot % len(f.boundaries)]
        elif f.boundaries and self.rng.random() < _BOUNDARY_PROB:
            value = float(self.rng.choice(f.boundaries))
        else:
            value = float(self.rng.uniform(f.lo, f.hi))
        if f.kind == "int":
            value = float(int(round(value)))
        return value

    def _observation(self, sweep_slot: int | None, time: float) -> Obs:
        obs: Obs = {}
        for f in OBS_FIELDS:
            obs[f.name] = self._field_value(f, sweep_slot)
        # Enforce cross-field consistency the environment guarantees.
        if sweep_slot == 0:
            obs["collision"] = 1.0
        else:
            obs["collision"] = 1.0 if self.rng.random() < _COLLISION_PROB else 0.0
        if obs["collision"] == 0.0:
            obs["collision_rel_speed"] = 0.0
        elif obs["collision_rel_speed"] == 0.0:
            obs["collision_rel_speed"] = float(self.rng.uniform(0.1, 30.0))
        obs["off_course"] = (
            1.0 if abs(obs["lateral_offset"]) > self.course["half_width"] else 0.0
        )
        obs["time"] = time
        return obs

    def sample(self) -> tuple[Obs, Obs, Obs]:
        sweep_slot = self._index if self._index < _SWEEP else None
        self._index += 1
        t_prev = 0.0 if sweep_slot == 0 else float(self.rng.uniform(0.0, 3599.0))
        prev = self._observation(sweep_slot, t_prev)
        cur = self._observation(sweep_slot, t_prev + 0.1)
        return cur, prev, self.course
