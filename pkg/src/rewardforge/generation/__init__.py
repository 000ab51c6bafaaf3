"""Reward-program generation: LLM clients, prompts, and sampling."""

from .generate import (
    DEFAULT_MAX_RETRIES,
    FEEDBACK_HEADER,
    VALIDATION_SAMPLES,
    GenerationError,
    GenerationResult,
    extract_program_text,
    generate_rewards,
    generate_single,
    repair,
    self_feedback,
)
from .llm_client import (
    HttpLLMClient,
    LLMClient,
    LLMTransportError,
    RecordingClient,
    ScriptedLLMClient,
)
from .mock import MockLLMClient, mock_llm
from .prompts import (
    REWARD_DESC_TAG,
    REWARD_NAME_TAG,
    PromptContext,
    build_initial_prompt,
    build_iteration_prompt,
    code_messages,
    default_context,
    repair_messages,
)

__all__ = [
    "DEFAULT_MAX_RETRIES",
    "FEEDBACK_HEADER",
    "VALIDATION_SAMPLES",
    "GenerationError",
    "GenerationResult",
    "extract_program_text",
    "generate_rewards",
    "generate_single",
    "repair",
    "self_feedback",
    "HttpLLMClient",
    "LLMClient",
    "LLMTransportError",
    "RecordingClient",
    "ScriptedLLMClient",
    "MockLLMClient",
    "mock_llm",
    "REWARD_DESC_TAG",
    "REWARD_NAME_TAG",
    "PromptContext",
    "build_initial_prompt",
    "build_iteration_prompt",
    "code_messages",
    "default_context",
    "repair_messages",
]
