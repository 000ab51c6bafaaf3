"""Prompt construction for two-stage reward generation.

Stage 1 asks for a plain-language design: named components in a tagged
list. Stage 2 turns an accepted design into DSL code. Iterations after
the first replace the blank-slate design ask with a revision ask built
from the previous round's best program, its training diagnostics, and
the feedback text.

All builders are pure: identical context yields byte-identical messages.
"""

from __future__ import annotations

from dataclasses import dataclass

REWARD_NAME_TAG = "<|reward name|>"
REWARD_DESC_TAG = "<|reward description|>"


@dataclass(frozen=True)
class PromptContext:
    goal: str
    schema_doc: str
    grammar_doc: str
    iteration: int = 1
    history: tuple[str, ...] = ()  # prior rounds' design overviews, oldest first
    best_program: str = ""
    diagnostics: str = ""
    feedback: str = ""

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if self.iteration < 1:
            raise ValueError("iteration counts from 1")
        if self.iteration == 1 and (
            self.history or self.best_program or self.diagnostics or self.feedback
        ):
            raise ValueError("the first iteration carries no history or feedback")


def default_context(goal: str, **overrides) -> PromptContext:
    """Context wired to the package's own schema and grammar documents."""
    from ..dsl import GRAMMAR_EBNF
    from ..schema import schema_doc

    return PromptContext(
        goal=goal, schema_doc=schema_doc(), grammar_doc=GRAMMAR_EBNF, **overrides
    )


_DESIGN_SYSTEM = (
    "You design reward functions for a reinforcement-learning agent that "
    "races a car against 19 opponents. You first describe the reward in "
    "plain language; code comes in a later message."
)

_TAG_FORMAT = f"""List every reward component you propose, one after another, each as:

{REWARD_NAME_TAG} component_name_in_snake_case
{REWARD_DESC_TAG} one or two sentences on what it rewards or penalizes and why it serves the goal.

Do not write code yet."""


def build_initial_prompt(ctx: PromptContext) -> list[dict]:
    """First-iteration design ask: goal + observable fields, tagged list out."""
    if ctx.iteration != 1:
        raise ValueError("initial prompt is only for iteration 1")
    user = f"""The agent's goal:

{ctx.goal}

At every step the agent observes the following fields:

{ctx.schema_doc}

Design the reward components the agent should be trained on. {_TAG_FORMAT}"""
    return [
        {"role": "system", "content": _DESIGN_SYSTEM},
        {"role": "user", "content": user},
    ]


def build_iteration_prompt(ctx: PromptContext) -> list[dict]:
    """Revision ask: prior designs, best program, diagnostics, feedback."""
    if ctx.iteration < 2:
        raise ValueError("iteration prompt needs iteration >= 2")
    for slot, value in (
        ("history", ctx.history),
        ("best_program", ctx.best_program),
        ("diagnostics", ctx.diagnostics),
        ("feedback", ctx.feedback),
    ):
        if not value:
            raise ValueError(f"iteration prompt needs {slot}")
    rounds = "\n\n".join(
        f"Round {k + 1} design:\n{overview}" for k, overview in enumerate(ctx.history)
    )
    user = f"""The agent's goal:

{ctx.goal}

At every step the agent observes the following fields:

{ctx.schema_doc}

You have designed {len(ctx.history)} round(s) of reward function components for this agent so far.

{rounds}

The best-performing reward program of the last round:

{ctx.best_program}

Its training diagnostics (per-component reward totals across training):

{ctx.diagnostics}

Observed behavior feedback on the trained agent:

{ctx.feedback}

First, list concrete suggestions for improving the reward. Each suggestion must take exactly one of these four actions:
- modify weight: change the weight of an existing component
- modify reward: change the expression of an existing component
- remove reward: drop an existing component
- new reward: add a component

Then restate the full revised design. {_TAG_FORMAT}"""
    return [
        {"role": "system", "content": _DESIGN_SYSTEM},
        {"role": "user", "content": user},
    ]


_CODE_SYSTEM = (
    "You translate reward designs into a small expression language. "
    "You reply with code only, inside one fenced block."
)


def code_messages(ctx: PromptContext, overview: str) -> list[dict]:
    """Stage 2: turn an accepted design overview into a DSL program."""
    user = f"""Here is the agreed reward design:

{overview}

Write it as a reward program in the expression language defined by this grammar:

{ctx.grammar_doc}

Field reference:

{ctx.schema_doc}

Rules:
- one `name = expression` line per component, names in lowercase snake_case
- finish with exactly one `weights:` line assigning a numeric weight to every component
- reply with the full program as a single fenced code block and nothing else"""
    return [
        {"role": "system", "content": _CODE_SYSTEM},
        {"role": "user", "content": user},
    ]


def repair_messages(
    ctx: PromptContext, bad_text: str, error_trace: str, attempt: int
) -> list[dict]:
    """Reprompt with the rejected program and its parse/eval trace."""
    user = f"""The reward program below was rejected (repair attempt {attempt}).

Rejected program:
```
{bad_text}
```

Error:
{error_trace}

Rewrite the complete program so it parses and evaluates to finite values on every state. Grammar:

{ctx.grammar_doc}

Reply with the corrected program as a single fenced code block and nothing else."""
    return [
        {"role": "system", "content": _CODE_SYSTEM},
        {"role": "user", "content": user},
    ]
