"""Durable run state: a ledger of completed phases with artifact hashes.

Every phase writes its artifacts to disk first, then records them (path +
sha256) in state.json. On resume, completed phases are verified against
their hashes and skipped; execution continues at the first missing phase.
Iteration 0 is reserved for run-level phases (final training/evaluation).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

STATE_FILE = "state.json"
CONFIG_FILE = "config.json"
FRAMES_DIR = "frames"
FINAL_DIR = "final"
FEEDBACK_REQUEST_FILE = "feedback_request.json"
FEEDBACK_TEXT_FILE = "feedback.txt"


def iteration_dir(run_dir: Path, iteration: int) -> Path:
    return Path(run_dir) / f"iter_{iteration}"


def seed_for(master: int, iteration: int, phase: str, index: int = 0) -> int:
    """Stable per-phase seed; independent draws for distinct labels."""
    tag = f"{master}:{iteration}:{phase}:{index}".encode()
    return int.from_bytes(hashlib.sha256(tag).digest()[:4], "big")


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class PhaseRecord:
    iteration: int  # 0 = run-level
    phase: str
    artifacts: dict[str, str]  # run-dir-relative path -> sha256
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "iteration": self.iteration,
            "phase": self.phase,
            "artifacts": self.artifacts,
            "meta": self.meta,
        }

    @staticmethod
    def from_json(doc: dict) -> "PhaseRecord":
        return PhaseRecord(
            iteration=int(doc["iteration"]),
            phase=doc["phase"],
            artifacts=dict(doc["artifacts"]),
            meta=doc.get("meta", {}),
        )


class StaleArtifactError(Exception):
    """A completed phase's artifact is missing or was modified."""


class RunState:
    """Phase ledger persisted at <run_dir>/state.json (atomic rewrites)."""

    def __init__(self, run_dir: Path):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / STATE_FILE
        self.status = "running"
        self.records: list[PhaseRecord] = []

    @staticmethod
    def load_or_create(run_dir: Path) -> "RunState":
        state = RunState(run_dir)
        if state.path.exists():
            doc = json.loads(state.path.read_text())
            state.status = doc["status"]
            state.records = [PhaseRecord.from_json(r) for r in doc["records"]]
        else:
            state.save()
        return state

    def save(self) -> None:
        doc = {
            "status": self.status,
            "records": [r.to_json() for r in self.records],
        }
        tmp = self.path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(doc, indent=2) + "\n")
        os.replace(tmp, self.path)

    def lookup(self, iteration: int, phase: str) -> PhaseRecord | None:
        for rec in self.records:
            if rec.iteration == iteration and rec.phase == phase:
                return rec
        return None

    def complete(self, iteration: int, phase: str, artifacts: list[Path], meta: dict) -> None:
        if self.lookup(iteration, phase) is not None:
            raise ValueError(f"phase {phase!r} of iteration {iteration} already recorded")
        hashed = {}
        for path in artifacts:
            rel = str(Path(path).resolve().relative_to(self.run_dir.resolve()))
            hashed[rel] = file_sha256(path)
        self.records.append(PhaseRecord(iteration, phase, hashed, meta))
        self.save()

    def verify(self, record: PhaseRecord) -> None:
        for rel, digest in record.artifacts.items():
            path = self.run_dir / rel
            if not path.exists():
                raise StaleArtifactError(
                    f"{rel} (iteration {record.iteration}, {record.phase}) is missing"
                )
            if file_sha256(path) != digest:
                raise StaleArtifactError(
                    f"{rel} (iteration {record.iteration}, {record.phase}) was modified"
                )

    def set_status(self, status: str) -> None:
        self.status = status
        self.save()

    def phase_meta(self, iteration: int, phase: str) -> dict:
        rec = self.lookup(iteration, phase)
        if rec is None:
            raise KeyError(f"iteration {iteration} has no completed {phase!r} phase")
        return rec.meta

    def completed_iterations(self) -> list[int]:
        """Iterations whose feedback phase (the last per-iteration one) is done."""
        return sorted(
            {r.iteration for r in self.records if r.iteration > 0 and r.phase == "feedback"}
        )
