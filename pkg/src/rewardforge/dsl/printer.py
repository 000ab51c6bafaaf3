"""Canonical printing of reward programs.

The printer is the inverse of the parser on its own output:
parse(print_program(p)) reproduces p node-for-node, and printing is
idempotent.  Parentheses are emitted only where precedence or
associativity requires them, so the canonical text doubles as a stable
dedup key for generated programs.
"""

from __future__ import annotations

from .ast import (
    BinOp,
    BoolOp,
    Call,
    Cmp,
    Expr,
    Lit,
    Neg,
    Not,
    Ref,
    RewardProgram,
)

_OR, _AND, _NOT, _CMP, _ADD, _MUL, _UNARY, _ATOM = range(1, 9)

_BIN_PREC = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL}
_BOOL_PREC = {"or": _OR, "and": _AND}


def format_number(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"cannot print non-finite literal {value!r}")
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _prec(node: Expr) -> int:
    if isinstance(node, (Lit, Ref, Call)):
        return _ATOM
    if isinstance(node, Neg):
        return _UNARY
    if isinstance(node, BinOp):
        return _BIN_PREC[node.op]
    if isinstance(node, Cmp):
        return _CMP
    if isinstance(node, Not):
        return _NOT
    if isinstance(node, BoolOp):
        return _BOOL_PREC[node.op]
    raise TypeError(f"not an expression node: {node!r}")


def _emit(node: Expr, parts: list[str]) -> None:
    if isinstance(node, Lit):
        if node.value < 0:
            parts.append(f"-{format_number(-node.value)}")
        else:
            parts.append(format_number(node.value))
    elif isinstance(node, Ref):
        parts.append(f"{node.source}.{node.field}")
    elif isinstance(node, Neg):
        parts.append("-")
        _child(node.operand, _UNARY, parts)
    elif isinstance(node, BinOp):
        prec = _BIN_PREC[node.op]
        _child(node.left, prec, parts)
        parts.append(f" {node.op} ")
        # left-associative: equal-precedence right operands keep parens
        _child(node.right, prec + 1, parts)
    elif isinstance(node, Cmp):
        _child(node.left, _CMP + 1, parts)
        parts.append(f" {node.op} ")
        _child(node.right, _CMP + 1, parts)
    elif isinstance(node, Not):
        parts.append("not ")
        _child(node.operand, _NOT, parts)
    elif isinstance(node, BoolOp):
        prec = _BOOL_PREC[node.op]
        _child(node.left, prec, parts)
        parts.append(f" {node.op} ")
        _child(node.right, prec + 1, parts)
    elif isinstance(node, Call):
        parts.append(node.fn)
        parts.append("(")
        for i, arg in enumerate(node.args):
            if i:
                parts.append(", ")
            _emit(arg, parts)
        parts.append(")")
    else:
        raise TypeError(f"not an expression node: {node!r}")


def _child(node: Expr, min_prec: int, parts: list[str]) -> None:
    if _prec(node) < min_prec:
        parts.append("(")
        _emit(node, parts)
        parts.append(")")
    else:
        _emit(node, parts)


def print_expr(node: Expr) -> str:
    parts: list[str] = []
    _emit(node, parts)
    return "".join(parts)


def print_program(program: RewardProgram) -> str:
    lines = [f"{c.name} = {print_expr(c.body)}" for c in program.components]
    weights = ", ".join(
        f"{c.name} = {format_number(program.weights[c.name])}"
        if program.weights[c.name] >= 0
        else f"{c.name} = -{format_number(-program.weights[c.name])}"
        for c in program.components
    )
    lines.append(f"weights: {weights}")
    return "\n".join(lines) + "\n"
