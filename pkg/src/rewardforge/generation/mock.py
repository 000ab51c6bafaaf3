"""Template LLM stand-in: emits schema-true reward programs offline.

Routes on marker phrases in the last user message (design ask, code ask,
repair ask, feedback ask) and draws from a fixed set of component
archetypes, so the whole generation pipeline runs deterministically
without a model endpoint. An invalid_rate knob emits deliberately broken
programs on fresh code asks to exercise the repair loop; repair asks
always come back fixed, the way a model shown its error trace does.
"""

from __future__ import annotations

import numpy as np

from .prompts import REWARD_DESC_TAG, REWARD_NAME_TAG

_DELTA = "cur.centerline_progress - prev.centerline_progress"

# (name, description, source line, weight range); the first three cover
# the behaviors any sane racing reward needs and are always emitted.
_CORE = (
    (
        "progress",
        "Forward distance gained along the centerline this step, corrected for the start-line wrap in either direction.",
        f"progress = if({_DELTA} < -100.0, {_DELTA} + course.total_length, if({_DELTA} > 100.0, {_DELTA} - course.total_length, {_DELTA}))",
        (0.8, 1.5),
    ),
    (
        "collision_penalty",
        "Penalizes contact with other cars, scaled up with closing speed.",
        "collision_penalty = -(cur.collision * (1.0 + cur.collision_rel_speed / 10.0))",
        (0.4, 1.2),
    ),
    (
        "offcourse_penalty",
        "Penalizes leaving the track, growing with how far outside the car is.",
        "offcourse_penalty = -(cur.off_course * (1.0 + max(abs(cur.lateral_offset) - course.half_width, 0.0)))",
        (0.4, 1.2),
    ),
)

_EXTRAS = (
    (
        "smoothness",
        "Discourages jerky steering changes between steps.",
        "smoothness = -abs(cur.steering - prev.steering)",
        (0.1, 0.5),
    ),
    (
        "passing",
        "Bonus for each race position gained.",
        "passing = max(prev.rank - cur.rank, 0.0) * 10.0",
        (0.2, 0.8),
    ),
    (
        "pace",
        "Small bonus proportional to current speed.",
        "pace = cur.speed / 55.0",
        (0.1, 0.5),
    ),
)

_BROKEN = (
    "progress = (cur.speed\nweights: progress = 1.0\n",  # unbalanced paren
    "ratio = 1.0 / (cur.speed - cur.speed)\nweights: ratio = 1.0\n",  # div by zero
    "root = sqrt(-1.0 - cur.collision)\nweights: root = 1.0\n",  # negative sqrt
    "pace = cur.speed\n",  # missing weights line
    "ghost = cur.warp_factor\nweights: ghost = 1.0\n",  # unknown field
)

_FEEDBACK_PHRASES = (
    "The agent holds the racing line on straights but brakes late into the hairpin.",
    "The agent overtakes cleanly on the outside when a gap opens.",
    "The agent occasionally clips the apex kerb and runs two wheels wide.",
    "The agent settles behind slower traffic instead of setting up a pass.",
    "The agent keeps steady pace through the esses with little steering jitter.",
)


class MockLLMClient:
    """Deterministic per seed; emission order depends only on call order."""

    def __init__(self, seed: int, invalid_rate: float = 0.0):
        if not 0.0 <= invalid_rate < 1.0:
            raise ValueError("invalid_rate must be within [0, 1)")
        self.rng = np.random.default_rng(seed)
        self.invalid_rate = invalid_rate

    def complete(self, messages: list[dict], **params) -> str:
        prompt = messages[-1]["content"]
        if "repair attempt" in prompt:
            return self._program_response(valid=True)
        if "fenced code block" in prompt:
            return self._program_response()
        if "Agent Summary" in prompt:
            return self._feedback_response()
        if REWARD_NAME_TAG in prompt:
            return self._overview_response()
        return self._program_response()

    def _pick(self):
        chosen = list(_CORE)
        for extra in _EXTRAS:
            if self.rng.random() < 0.5:
                chosen.append(extra)
        return chosen

    def _overview_response(self) -> str:
        lines = []
        for name, desc, _, _ in self._pick():
            lines.append(f"{REWARD_NAME_TAG} {name}")
            lines.append(f"{REWARD_DESC_TAG} {desc}")
        return "\n".join(lines)

    def _program_response(self, valid: bool = False) -> str:
        if not valid and self.rng.random() < self.invalid_rate:
            src = _BROKEN[int(self.rng.integers(len(_BROKEN)))]
        else:
            chosen = self._pick()
            weights = ", ".join(
                f"{name} = {self.rng.uniform(lo, hi):.2f}" for name, _, _, (lo, hi) in chosen
            )
            src = "\n".join(line for _, _, line, _ in chosen) + f"\nweights: {weights}\n"
        return f"Here is the reward program.\n\n```\n{src}```\n"

    def _feedback_response(self) -> str:
        k = int(self.rng.integers(2, 4))
        picks = self.rng.choice(len(_FEEDBACK_PHRASES), size=k, replace=False)
        body = " ".join(_FEEDBACK_PHRASES[i] for i in sorted(picks))
        return f"## Agent Summary\n{body}"


def mock_llm(seed: int, invalid_rate: float = 0.0) -> MockLLMClient:
    return MockLLMClient(seed, invalid_rate)
