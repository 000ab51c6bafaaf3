"""Trajectory preference judges and pairwise ranking."""

from .base import TRANSPORT_RETRIES, Judge, JudgeVerdict, pairwise_judge
from .llm import (
    CLIP_SECONDS,
    FPS,
    MAX_VIDEO_SECONDS,
    JudgeFormatError,
    LLMJudge,
    Modality,
    capped_rows,
    clip_frames,
    llm_judge_pipeline,
    parse_preference,
    render_clip,
)
from .oracle import NoisyOracleJudge, OracleJudge, noisy_oracle_judge, oracle_judge, race_fitness
from .ranking import (
    MAX_ITERATIONS,
    SMOOTHING,
    TOLERANCE,
    RankingResult,
    bradley_terry,
    select_best,
    win_matrix,
)

__all__ = [
    "TRANSPORT_RETRIES",
    "Judge",
    "JudgeVerdict",
    "pairwise_judge",
    "CLIP_SECONDS",
    "FPS",
    "MAX_VIDEO_SECONDS",
    "JudgeFormatError",
    "LLMJudge",
    "Modality",
    "capped_rows",
    "clip_frames",
    "llm_judge_pipeline",
    "parse_preference",
    "render_clip",
    "NoisyOracleJudge",
    "OracleJudge",
    "noisy_oracle_judge",
    "oracle_judge",
    "race_fitness",
    "MAX_ITERATIONS",
    "SMOOTHING",
    "TOLERANCE",
    "RankingResult",
    "bradley_terry",
    "select_best",
    "win_matrix",
]
