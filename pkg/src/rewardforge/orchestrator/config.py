"""Run configuration: goal, loop sizes, budgets, judge and feedback wiring."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..trainer import EnvConfig, TrainSettings

FEEDBACK_SOURCES = ("cli", "file", "http", "self")
FINAL_BUDGET_RATIO = 5  # final training budget when not set explicitly
# how long collect_feedback waits before giving up, per source
DEFAULT_FEEDBACK_TIMEOUT = {"cli": 0.0, "file": 86400.0, "http": 86400.0, "self": 0.0}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; JSON round-trips for resume."""

    goal: str
    iterations: int = 3  # outer design rounds
    programs_per_iteration: int = 6  # candidates requested from the LLM
    train_top: int = 3  # alignment-filtered candidates that get trained
    train_budget: int = 2  # epochs per in-loop training
    final_budget: int = 0  # epochs for the last policy; 0 = 5x train_budget
    eval_races: int = 12  # races behind the final placement statistics
    env: EnvConfig = field(default_factory=EnvConfig)
    judge: str = "oracle"  # oracle | noisy-oracle:<p> | llm | llm:<modality>
    feedback_source: str = "self"
    feedback_timeout: float | None = None  # None picks the source default
    feedback_path: str = ""  # file source: path to watch for text
    llm_url: str = ""  # chat endpoint; empty = built-in mock client
    llm_model: str = ""
    seed: int = 0
    settings: TrainSettings = field(default_factory=TrainSettings)

    def __post_init__(self):
        if not self.goal.strip():
            raise ValueError("goal must be non-empty")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if self.train_top > self.programs_per_iteration:
            raise ValueError("cannot train more programs than are generated")
        if self.train_top < 2:
            raise ValueError("ranking needs at least two trained agents")
        if self.train_budget < 1 or self.final_budget < 0:
            raise ValueError("budgets must be positive")
        if self.eval_races < 4:
            raise ValueError("final evaluation needs at least four races")
        if self.feedback_source not in FEEDBACK_SOURCES:
            raise ValueError(f"unknown feedback source {self.feedback_source!r}")
        if self.feedback_source == "file" and not self.feedback_path:
            raise ValueError("file feedback needs feedback_path")
        _validate_judge_spec(self.judge)

    @property
    def resolved_final_budget(self) -> int:
        return self.final_budget or FINAL_BUDGET_RATIO * self.train_budget

    @property
    def resolved_feedback_timeout(self) -> float:
        if self.feedback_timeout is not None:
            return self.feedback_timeout
        return DEFAULT_FEEDBACK_TIMEOUT[self.feedback_source]

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["env"] = self.env.to_json()
        return doc

    @staticmethod
    def from_json(doc: dict) -> "RunConfig":
        doc = dict(doc)
        doc["env"] = EnvConfig.from_json(doc["env"]) if "env" in doc else EnvConfig()
        doc["settings"] = TrainSettings(**doc.get("settings", {}))
        return RunConfig(**doc)

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @staticmethod
    def load(path: Path) -> "RunConfig":
        return RunConfig.from_json(json.loads(Path(path).read_text()))


def _validate_judge_spec(spec: str) -> None:
    if spec == "oracle" or spec == "llm":
        return
    if spec.startswith("noisy-oracle:"):
        p = float(spec.split(":", 1)[1])
        if not 0.0 <= p <= 0.5:
            raise ValueError("noisy-oracle flip probability must be in [0, 0.5]")
        return
    if spec.startswith("llm:"):
        mode = spec.split(":", 1)[1]
        if mode not in ("trajectory", "image", "both"):
            raise ValueError(f"unknown judge modality {mode!r}")
        return
    raise ValueError(f"unknown judge spec {spec!r}")
