"""Reward-program evaluation: scalar per-step and vectorized batch modes.

Semantics shared by both modes:
  - all values are float64; comparisons and boolean ops yield 1.0 / 0.0
  - `and`/`or` evaluate both operands (no short-circuit); `if(c, a, b)`
    evaluates only the selected branch, so it is the guard for partial
    operations like division
  - division by zero, sqrt of a negative, and any non-finite
    intermediate are hard errors, never silently clamped

Batch mode tracks per-lane error masks so a branch of `if` only faults
for lanes that actually select it; on any fault it re-runs the scalar
evaluator on the first faulting lane to raise the identical EvalError.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .ast import BinOp, BoolOp, Call, Cmp, Expr, Lit, Neg, Not, Ref, RewardProgram
from .printer import print_expr

DIVISION_BY_ZERO = "division_by_zero"
SQRT_NEGATIVE = "sqrt_negative"
NON_FINITE = "non_finite"

ERROR_KINDS = (DIVISION_BY_ZERO, SQRT_NEGATIVE, NON_FINITE)


class EvalError(Exception):
    """Raised when a reward program faults; message doubles as a repair trace."""

    def __init__(self, component: str, kind: str, cause: str):
        self.component = component
        self.kind = kind
        self.cause = cause
        super().__init__(f"{kind.replace('_', ' ')} in component {component!r}: {cause}")


@dataclass(frozen=True)
class EvalResult:
    per_component: dict[str, float]
    total: float


@dataclass(frozen=True)
class BatchEvalResult:
    per_component: dict[str, np.ndarray]
    total: np.ndarray


Obs = Mapping[str, float]


# ---------------------------------------------------------------------------
# scalar mode


class _Fault(Exception):
    def __init__(self, kind: str, cause: str):
        self.kind = kind
        self.cause = cause


def _truth(x: float) -> bool:
    return x != 0.0


def _seval(node: Expr, cur: Obs, prev: Obs, course: Obs) -> float:
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Ref):
        if node.source == "cur":
            return float(cur[node.field])
        if node.source == "prev":
            return float(prev[node.field])
        return float(course[node.field])
    if isinstance(node, Neg):
        return -_seval(node.operand, cur, prev, course)
    if isinstance(node, BinOp):
        a = _seval(node.left, cur, prev, course)
        b = _seval(node.right, cur, prev, course)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            if b == 0.0:
                raise _Fault(DIVISION_BY_ZERO, f"division by zero in `{print_expr(node)}`")
            out = a / b
        if not math.isfinite(out):
            raise _Fault(NON_FINITE, f"`{print_expr(node)}` is not finite")
        return out
    if isinstance(node, Cmp):
        a = _seval(node.left, cur, prev, course)
        b = _seval(node.right, cur, prev, course)
        if node.op == "<":
            return 1.0 if a < b else 0.0
        if node.op == "<=":
            return 1.0 if a <= b else 0.0
        if node.op == ">":
            return 1.0 if a > b else 0.0
        if node.op == ">=":
            return 1.0 if a >= b else 0.0
        return 1.0 if a == b else 0.0
    if isinstance(node, BoolOp):
        a = _truth(_seval(node.left, cur, prev, course))
        b = _truth(_seval(node.right, cur, prev, course))
        if node.op == "and":
            return 1.0 if (a and b) else 0.0
        return 1.0 if (a or b) else 0.0
    if isinstance(node, Not):
        return 0.0 if _truth(_seval(node.operand, cur, prev, course)) else 1.0
    if isinstance(node, Call):
        if node.fn == "if":
            cond = _seval(node.args[0], cur, prev, course)
            branch = node.args[1] if _truth(cond) else node.args[2]
            return _seval(branch, cur, prev, course)
        args = [_seval(a, cur, prev, course) for a in node.args]
        if node.fn == "abs":
            return abs(args[0])
        if node.fn == "sqrt":
            if args[0] < 0.0:
                raise _Fault(
                    SQRT_NEGATIVE, f"sqrt of negative value in `{print_expr(node)}`"
                )
            return math.sqrt(args[0])
        if node.fn == "exp":
            try:
                return math.exp(args[0])
            except OverflowError:
                raise _Fault(NON_FINITE, f"`{print_expr(node)}` overflows") from None
        if node.fn == "tanh":
            return math.tanh(args[0])
        if node.fn == "sign":
            if args[0] > 0.0:
                return 1.0
            return -1.0 if args[0] < 0.0 else 0.0
        if node.fn == "min":
            return min(args[0], args[1])
        if node.fn == "max":
            return max(args[0], args[1])
        # clip(x, lo, hi) == min(max(x, lo), hi); well-defined even if lo > hi
        return min(max(args[0], args[1]), args[2])
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(program: RewardProgram, cur: Obs, prev: Obs, course: Obs) -> EvalResult:
    """Evaluate one step; raises EvalError naming the faulting component."""
    per: dict[str, float] = {}
    for comp in program.components:
        try:
            value = _seval(comp.body, cur, prev, course)
        except _Fault as f:
            raise EvalError(comp.name, f.kind, f.cause) from None
        if not math.isfinite(value):
            raise EvalError(comp.name, NON_FINITE, "component value is not finite")
        per[comp.name] = value
    total = 0.0
    for comp in program.components:
        total += program.weights[comp.name] * per[comp.name]
    if not math.isfinite(total):
        raise EvalError("total", NON_FINITE, "weighted sum is not finite")
    return EvalResult(per, total)


def component_faults(
    program: RewardProgram, cur: Obs, prev: Obs, course: Obs
) -> list[EvalError]:
    """Evaluate every component (no fail-fast); returns all faults.

    Unlike evaluate(), a faulting component does not hide faults in later
    ones, so validation can report per-component traces in one pass.
    """
    faults: list[EvalError] = []
    per: dict[str, float] = {}
    for comp in program.components:
        try:
            value = _seval(comp.body, cur, prev, course)
            if not math.isfinite(value):
                raise _Fault(NON_FINITE, "component value is not finite")
            per[comp.name] = value
        except _Fault as f:
            faults.append(EvalError(comp.name, f.kind, f.cause))
    if not faults:
        total = sum(program.weights[k] * v for k, v in per.items())
        if not math.isfinite(total):
            faults.append(EvalError("total", NON_FINITE, "weighted sum is not finite"))
    return faults


# ---------------------------------------------------------------------------
# batch mode

_KIND_CODE = {DIVISION_BY_ZERO: 1, SQRT_NEGATIVE: 2, NON_FINITE: 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}

BatchObs = Mapping[str, np.ndarray]


class _BatchState:
    def __init__(self, n: int):
        self.err = np.zeros(n, dtype=np.int8)

    def flag(self, live: np.ndarray, bad: np.ndarray, kind: str) -> None:
        hit = live & bad & (self.err == 0)
        if hit.any():
            self.err[hit] = _KIND_CODE[kind]


def _lookup(ctx: BatchObs, field: str, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(ctx[field], dtype=np.float64), (n,))


def _beval(
    node: Expr,
    cur: BatchObs,
    prev: BatchObs,
    course: BatchObs,
    live: np.ndarray,
    state: _BatchState,
) -> np.ndarray:
    n = live.shape[0]
    if isinstance(node, Lit):
        return np.full(n, node.value)
    if isinstance(node, Ref):
        src = cur if node.source == "cur" else prev if node.source == "prev" else course
        return _lookup(src, node.field, n)
    if isinstance(node, Neg):
        return -_beval(node.operand, cur, prev, course, live, state)
    if isinstance(node, BinOp):
        a = _beval(node.left, cur, prev, course, live, state)
        b = _beval(node.right, cur, prev, course, live, state)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            else:
                state.flag(live, b == 0.0, DIVISION_BY_ZERO)
                out = np.divide(a, np.where(b == 0.0, 1.0, b))
        state.flag(live, ~np.isfinite(out), NON_FINITE)
        return out
    if isinstance(node, Cmp):
        a = _beval(node.left, cur, prev, course, live, state)
        b = _beval(node.right, cur, prev, course, live, state)
        if node.op == "<":
            return (a < b).astype(np.float64)
        if node.op == "<=":
            return (a <= b).astype(np.float64)
        if node.op == ">":
            return (a > b).astype(np.float64)
        if node.op == ">=":
            return (a >= b).astype(np.float64)
        return (a == b).astype(np.float64)
    if isinstance(node, BoolOp):
        a = _beval(node.left, cur, prev, course, live, state) != 0.0
        b = _beval(node.right, cur, prev, course, live, state) != 0.0
        if node.op == "and":
            return (a & b).astype(np.float64)
        return (a | b).astype(np.float64)
    if isinstance(node, Not):
        a = _beval(node.operand, cur, prev, course, live, state)
        return (a == 0.0).astype(np.float64)
    if isinstance(node, Call):
        if node.fn == "if":
            cond = _beval(node.args[0], cur, prev, course, live, state)
            take_a = cond != 0.0
            a = _beval(node.args[1], cur, prev, course, live & take_a, state)
            b = _beval(node.args[2], cur, prev, course, live & ~take_a, state)
            return np.where(take_a, a, b)
        args = [_beval(arg, cur, prev, course, live, state) for arg in node.args]
        with np.errstate(invalid="ignore", over="ignore"):
            if node.fn == "abs":
                return np.abs(args[0])
            if node.fn == "sqrt":
                state.flag(live, args[0] < 0.0, SQRT_NEGATIVE)
                return np.sqrt(np.where(args[0] < 0.0, 0.0, args[0]))
            if node.fn == "exp":
                out = np.exp(args[0])
                state.flag(live, ~np.isfinite(out), NON_FINITE)
                return out
            if node.fn == "tanh":
                return np.tanh(args[0])
            if node.fn == "sign":
                return np.sign(args[0])
            if node.fn == "min":
                return np.minimum(args[0], args[1])
            if node.fn == "max":
                return np.maximum(args[0], args[1])
            return np.minimum(np.maximum(args[0], args[1]), args[2])
    raise TypeError(f"not an expression node: {node!r}")


def _raise_first_lane(
    program: RewardProgram,
    cur: BatchObs,
    prev: BatchObs,
    course: BatchObs,
    state: _BatchState,
) -> None:
    lane = int(np.argmax(state.err != 0))

    def pick(ctx: BatchObs) -> dict[str, float]:
        return {
            k: float(np.broadcast_to(v, state.err.shape)[lane]) for k, v in ctx.items()
        }

    evaluate(program, pick(cur), pick(prev), pick(course))
    # Scalar re-run should have raised; fall back to the mask's verdict.
    raise EvalError(  # pragma: no cover
        "<batch>", _CODE_KIND[int(state.err[lane])], f"fault detected in lane {lane}"
    )


def evaluate_batch(
    program: RewardProgram, cur: BatchObs, prev: BatchObs, course: BatchObs
) -> BatchEvalResult:
    """Vectorized evaluate over lanes of equal length; course fields broadcast.

    Raises the same EvalError scalar evaluation would raise on the first
    (lowest-index) faulting lane.
    """
    n = max(np.asarray(v).shape[0] if np.asarray(v).ndim else 1 for v in cur.values())
    live = np.ones(n, dtype=bool)
    state = _BatchState(n)
    per: dict[str, np.ndarray] = {}
    for comp in program.components:
        values = _beval(comp.body, cur, prev, course, live, state)
        state.flag(live, ~np.isfinite(values), NON_FINITE)
        per[comp.name] = values
    total = np.zeros(n)
    for comp in program.components:
        total = total + program.weights[comp.name] * per[comp.name]
    state.flag(live, ~np.isfinite(total), NON_FINITE)
    if state.err.any():
        _raise_first_lane(program, cur, prev, course, state)
    return BatchEvalResult(per, total)
