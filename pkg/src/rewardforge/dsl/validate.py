"""Runnability validation: evaluate a program over sampled observations."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import RewardProgram
from .evaluator import component_faults
from .sampler import ObservationSampler

MAX_DISTINCT_FAILURES = 10


@dataclass(frozen=True)
class ValidationFailure:
    component: str
    kind: str
    cause: str
    sample_index: int


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    n_samples: int
    failures: tuple[ValidationFailure, ...]

    def trace(self) -> str:
        """Failure summary worded for inclusion in a repair prompt."""
        if self.ok:
            return "ok"
        lines = [
            f"{len(self.failures)} distinct failure(s)"
            f" over {self.n_samples} sampled states:"
        ]
        for f in self.failures:
            lines.append(
                f"- component {f.component!r}: {f.kind.replace('_', ' ')}"
                f" ({f.cause}; first seen on sample {f.sample_index})"
            )
        return "\n".join(lines)


def validate(
    program: RewardProgram, sampler: ObservationSampler, n_samples: int
) -> ValidationReport:
    """Evaluate on n_samples draws; failures are data, never raised.

    Distinct failures are keyed by (component, kind) and capped at
    MAX_DISTINCT_FAILURES; every sample is still evaluated.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seen: dict[tuple[str, str], ValidationFailure] = {}
    for i in range(n_samples):
        cur, prev, course = sampler.sample()
        for e in component_faults(program, cur, prev, course):
            key = (e.component, e.kind)
            if key not in seen and len(seen) < MAX_DISTINCT_FAILURES:
                seen[key] = ValidationFailure(e.component, e.kind, e.cause, i)
    failures = tuple(seen.values())
    return ValidationReport(ok=not failures, n_samples=n_samples, failures=failures)
