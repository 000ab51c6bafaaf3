"""Expression trees for reward programs.

All nodes are frozen dataclasses: programs are immutable after construction
and safe to share between concurrent trainers. Every expression evaluates to
a double; comparisons and logical operators yield 1.0 / 0.0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

MAX_DEPTH = 64
MAX_NODES = 4096

COMPONENT_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

ARITH_OPS = ("+", "-", "*", "/")
CMP_OPS = ("<", "<=", ">", ">=", "==")

# fn name -> arity
FUNCTIONS: dict[str, int] = {
    "abs": 1,
    "sqrt": 1,
    "exp": 1,
    "tanh": 1,
    "sign": 1,
    "min": 2,
    "max": 2,
    "clip": 3,
    "if": 3,
}


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Ref:
    source: str  # "cur" | "prev" | "course"
    field: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of ARITH_OPS
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cmp:
    op: str  # one of CMP_OPS
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]


Expr = Union[Lit, Ref, Neg, BinOp, Cmp, BoolOp, Not, Call]


@dataclass(frozen=True)
class RewardComponent:
    name: str
    body: Expr


@dataclass(frozen=True)
class RewardProgram:
    """Named reward components combined as a weighted sum.

    The total reward of a step is sum(weights[name] * value(component)).
    Invariants (enforced by the parser and by __post_init__): component
    names are unique and match ``[a-z][a-z0-9_]*``; weights carry exactly
    one finite entry per component.
    """

    components: tuple[RewardComponent, ...]
    weights: dict[str, float] = field(hash=False)

    def __post_init__(self):
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError("duplicate component names")
        for n in names:
            if not COMPONENT_NAME_RE.match(n):
                raise ValueError(f"invalid component name: {n!r}")
        if set(self.weights) != set(names):
            raise ValueError("weights must have exactly one entry per component")
        for n, w in self.weights.items():
            if not _finite(w):
                raise ValueError(f"non-finite weight for {n!r}")

    @property
    def component_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.components)

    def with_weights(self, weights: dict[str, float]) -> "RewardProgram":
        return RewardProgram(self.components, dict(weights))

    def __eq__(self, other):
        if not isinstance(other, RewardProgram):
            return NotImplemented
        return self.components == other.components and self.weights == other.weights


def _finite(x: float) -> bool:
    return x == x and x not in (float("inf"), float("-inf"))


def iter_nodes(expr: Expr):
    """Iterative preorder walk (safe for degenerate deep trees)."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Neg, Not)):
            stack.append(node.operand)
        elif isinstance(node, (BinOp, Cmp, BoolOp)):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Call):
            stack.extend(reversed(node.args))


def node_count(expr: Expr) -> int:
    return sum(1 for _ in iter_nodes(expr))


def tree_depth(expr: Expr) -> int:
    depth = 0
    stack: list[tuple[Expr, int]] = [(expr, 1)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if isinstance(node, (Neg, Not)):
            stack.append((node.operand, d + 1))
        elif isinstance(node, (BinOp, Cmp, BoolOp)):
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))
        elif isinstance(node, Call):
            stack.extend((a, d + 1) for a in node.args)
    return depth
