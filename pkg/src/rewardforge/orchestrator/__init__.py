"""Design-loop orchestration: phased runs, resume, evaluation, HTTP API."""

from .api import API_PREFIX, create_app
from .artifacts import (
    course_geometry,
    iteration_transcripts,
    iteration_view,
    iteration_views,
    label_tasks,
    pending_feedback,
    post_feedback,
    run_overview,
    submit_label,
    trajectory_frames,
    trajectory_summary,
)
from .config import FEEDBACK_SOURCES, FINAL_BUDGET_RATIO, RunConfig
from .run import (
    EvalReport,
    RunResult,
    ablate_buffer,
    collect_feedback,
    evaluate_final,
    resume,
    run,
)
from .state import RunState, StaleArtifactError, iteration_dir, seed_for

__all__ = [
    "API_PREFIX",
    "FEEDBACK_SOURCES",
    "FINAL_BUDGET_RATIO",
    "EvalReport",
    "RunConfig",
    "RunResult",
    "RunState",
    "StaleArtifactError",
    "ablate_buffer",
    "collect_feedback",
    "course_geometry",
    "create_app",
    "evaluate_final",
    "iteration_dir",
    "iteration_transcripts",
    "iteration_view",
    "iteration_views",
    "label_tasks",
    "pending_feedback",
    "post_feedback",
    "resume",
    "run",
    "run_overview",
    "seed_for",
    "submit_label",
    "trajectory_frames",
    "trajectory_summary",
]
