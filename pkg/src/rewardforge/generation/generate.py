"""Two-stage reward sampling with a validate/repair loop.

Each sample is an independent design ask followed by a code ask; the
returned program must parse and evaluate to finite values on randomly
sampled states before it leaves this module. Rejected programs are sent
back with their error trace for up to max_retries rewrites.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..dsl import ObservationSampler, ParseError, RewardProgram, parse, validate
from .llm_client import LLMClient, LLMTransportError
from .prompts import (
    PromptContext,
    build_initial_prompt,
    build_iteration_prompt,
    code_messages,
    repair_messages,
)

TRANSPORT_RETRIES = 3
DEFAULT_MAX_RETRIES = 5
VALIDATION_SAMPLES = 100

FEEDBACK_HEADER = "## Agent Summary"

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


class GenerationError(Exception):
    """A sample exhausted its repair budget (or feedback stayed empty)."""


@dataclass
class GenerationResult:
    overview: str
    program: RewardProgram
    text: str  # accepted program source
    repair_attempts: int
    transcripts: list[dict] = field(default_factory=list)


def extract_program_text(response: str) -> str:
    """Last fenced block if any (models often preface with prose)."""
    blocks = _FENCE_RE.findall(response)
    text = blocks[-1] if blocks else response
    return text.strip() + "\n"


def _complete(client: LLMClient, messages: list[dict], transcripts: list[dict], stage: str) -> str:
    last: Exception | None = None
    for _ in range(TRANSPORT_RETRIES):
        try:
            response = client.complete(messages)
            transcripts.append({"stage": stage, "messages": messages, "response": response})
            return response
        except LLMTransportError as exc:
            last = exc
    raise LLMTransportError(f"{stage} call failed after {TRANSPORT_RETRIES} attempts: {last}")


def _attempt(text: str, sampler: ObservationSampler, n_samples: int):
    """(program, None) when text is runnable, else (None, error trace)."""
    try:
        program = parse(text)
    except ParseError as exc:
        return None, f"parse error: {exc}"
    report = validate(program, sampler, n_samples)
    if not report.ok:
        return None, report.trace()
    return program, None


def repair(
    client: LLMClient,
    ctx: PromptContext,
    bad_text: str,
    error_trace: str,
    attempt: int,
    transcripts: list[dict] | None = None,
) -> str:
    """One rewrite ask; returns the candidate program text."""
    messages = repair_messages(ctx, bad_text, error_trace, attempt)
    sink = transcripts if transcripts is not None else []
    return extract_program_text(_complete(client, messages, sink, "repair"))


def generate_single(
    client: LLMClient,
    ctx: PromptContext,
    sampler: ObservationSampler,
    max_retries: int = DEFAULT_MAX_RETRIES,
    n_samples: int = VALIDATION_SAMPLES,
    sample_index: int = 0,
) -> GenerationResult:
    transcripts: list[dict] = []
    design_ask = build_initial_prompt(ctx) if ctx.iteration == 1 else build_iteration_prompt(ctx)
    overview = _complete(client, design_ask, transcripts, "overview")
    response = _complete(client, code_messages(ctx, overview), transcripts, "code")
    text = extract_program_text(response)
    repair_attempts = 0
    while True:
        program, trace = _attempt(text, sampler, n_samples)
        if program is not None:
            return GenerationResult(overview, program, text, repair_attempts, transcripts)
        if repair_attempts >= max_retries:
            raise GenerationError(
                f"sample {sample_index}: no runnable program after "
                f"{max_retries} repair(s); last error: {trace}"
            )
        repair_attempts += 1
        text = repair(client, ctx, text, trace, repair_attempts, transcripts)


def generate_rewards(
    client: LLMClient,
    ctx: PromptContext,
    m: int,
    sampler: ObservationSampler | None = None,
    max_retries: int = DEFAULT_MAX_RETRIES,
    n_samples: int = VALIDATION_SAMPLES,
    seed: int = 0,
) -> list[GenerationResult]:
    """m independent samples; every returned program is runnable."""
    if m < 1:
        raise ValueError("need at least one sample")
    sampler = sampler or ObservationSampler(seed)
    return [
        generate_single(client, ctx, sampler, max_retries, n_samples, k)
        for k in range(m)
    ]


def self_feedback(
    client: LLMClient,
    trajectory_descriptions: list[str],
    transcripts: list[dict] | None = None,
) -> str:
    """Closed-loop substitute for human feedback: a behavior summary
    distilled from the judge pipeline's clip descriptions."""
    if not trajectory_descriptions:
        raise ValueError("need at least one clip description")
    sink = transcripts if transcripts is not None else []
    body = "\n\n".join(
        f"Clip {k + 1}: {text}" for k, text in enumerate(trajectory_descriptions)
    )
    messages = [
        {"role": "system", "content": "You summarize how a trained racing agent behaves on track."},
        {"role": "user", "content": (
            f"Clip-by-clip descriptions of the trained agent's evaluation run:\n\n{body}\n\n"
            "Provide a detailed summary of the agent's driving behavior: its strengths, "
            "its failures, and the specific behavior changes that would most improve it. "
            f"Begin your reply with '{FEEDBACK_HEADER}'."
        )},
    ]
    text = _complete(client, messages, sink, "feedback").strip()
    if not text:
        retry = messages + [
            {"role": "assistant", "content": ""},
            {"role": "user", "content": f"Your reply was empty. {FEEDBACK_HEADER} must head a non-empty summary."},
        ]
        text = _complete(client, retry, sink, "feedback").strip()
        if not text:
            raise GenerationError("feedback stayed empty after one reprompt")
    if not text.startswith(FEEDBACK_HEADER):
        text = f"{FEEDBACK_HEADER}\n{text}"
    return text
