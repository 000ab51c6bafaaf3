"""Closed scalar expression language for reward programs.

Programs are parsed from `name = expr` lines plus a `weights:` line,
printed canonically (parse∘print is the identity on valid programs), and
evaluated per-step or vectorized over batches with identical fault
semantics.
"""

from .ast import (
    MAX_DEPTH,
    MAX_NODES,
    BinOp,
    BoolOp,
    Call,
    Cmp,
    Expr,
    Lit,
    Neg,
    Not,
    Ref,
    RewardComponent,
    RewardProgram,
    iter_nodes,
    node_count,
    tree_depth,
)
from .evaluator import (
    DIVISION_BY_ZERO,
    ERROR_KINDS,
    NON_FINITE,
    SQRT_NEGATIVE,
    BatchEvalResult,
    EvalError,
    EvalResult,
    evaluate,
    evaluate_batch,
)
from .grammar import GRAMMAR_EBNF, GRAMMAR_VERSION
from .parser import ParseError, parse, tokenize
from .printer import print_expr, print_program
from .sampler import ObservationSampler
from .validate import ValidationFailure, ValidationReport, validate

__all__ = [
    "MAX_DEPTH",
    "MAX_NODES",
    "BinOp",
    "BoolOp",
    "Call",
    "Cmp",
    "Expr",
    "Lit",
    "Neg",
    "Not",
    "Ref",
    "RewardComponent",
    "RewardProgram",
    "iter_nodes",
    "node_count",
    "tree_depth",
    "DIVISION_BY_ZERO",
    "ERROR_KINDS",
    "NON_FINITE",
    "SQRT_NEGATIVE",
    "BatchEvalResult",
    "EvalError",
    "EvalResult",
    "evaluate",
    "evaluate_batch",
    "GRAMMAR_EBNF",
    "GRAMMAR_VERSION",
    "ParseError",
    "parse",
    "tokenize",
    "print_expr",
    "print_program",
    "ObservationSampler",
    "ValidationFailure",
    "ValidationReport",
    "validate",
]
