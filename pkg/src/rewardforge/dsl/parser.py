"""Tokenizer and recursive-descent parser for reward programs.

Parse errors carry line, column, and the set of expected tokens so the
repair prompt can point the model at the exact failure site.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from ..schema import DSL_SOURCES
from .ast import (
    CMP_OPS,
    COMPONENT_NAME_RE,
    FUNCTIONS,
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
    tree_depth,
)

MAX_SOURCE_BYTES = 1 << 20

KEYWORDS = {"and", "or", "not", "weights"} | set(FUNCTIONS) | set(DSL_SOURCES)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        loc = f"line {line}, column {col}"
        if expected:
            message = f"{message} at {loc} (expected {', '.join(expected)})"
        else:
            message = f"{message} at {loc}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    kind: str  # NAME NUMBER OP NEWLINE EOF
    text: str
    line: int
    col: int


_OPS = ("<=", ">=", "==", "<", ">", "+", "-", "*", "/", "(", ")", ",", "=", ".", ":")


def tokenize(text: str) -> list[Token]:
    if len(text.encode("utf-8", errors="replace")) > MAX_SOURCE_BYTES:
        raise ParseError("program text too large", 1, 1)
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            toks.append(Token("NEWLINE", "\n", line, col))
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
                col += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            start = i
            while i < n and (text[i].isdigit() or text[i] == "."):
                i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            lit = text[start:i]
            toks.append(Token("NUMBER", lit, line, col))
            col += i - start
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            toks.append(Token("NAME", text[start:i], line, col))
            col += i - start
            continue
        for op in _OPS:
            if text.startswith(op, i):
                toks.append(Token("OP", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0
        self.nodes = 0

    # token helpers ----------------------------------------------------
    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "OP" and t.text in ops

    def expect_op(self, op: str) -> Token:
        t = self.peek()
        if t.kind != "OP" or t.text != op:
            raise ParseError(f"unexpected {describe(t)}", t.line, t.col, (repr(op),))
        return self.next()

    def err(self, msg: str, expected: tuple[str, ...] = ()) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col, expected)

    def make(self, cls, *args) -> Expr:
        self.nodes += 1
        if self.nodes > MAX_NODES:
            t = self.peek()
            raise ParseError(
                f"expression too large (more than {MAX_NODES} nodes)", t.line, t.col
            )
        return cls(*args)

    # grammar ----------------------------------------------------------
    def parse_program(self) -> RewardProgram:
        components: list[RewardComponent] = []
        weights: dict[str, float] | None = None
        while True:
            while self.peek().kind == "NEWLINE":
                self.next()
            t = self.peek()
            if t.kind == "EOF":
                break
            if t.kind != "NAME":
                raise ParseError(
                    f"unexpected {describe(t)}", t.line, t.col,
                    ("component name", "'weights:'"),
                )
            if t.text == "weights":
                if weights is not None:
                    raise ParseError("duplicate weights line", t.line, t.col)
                weights = self.parse_weights()
                continue
            components.append(self.parse_component(known=[c.name for c in components]))
        if not components:
            t = self.peek()
            raise ParseError("program has no components", t.line, t.col)
        if weights is None:
            t = self.toks[-1]
            raise ParseError("missing weights line", t.line, t.col, ("'weights:'",))
        comp_names = {c.name for c in components}
        for name in weights:
            if name not in comp_names:
                t = self.toks[-1]
                raise ParseError(
                    f"weight for unknown component {name!r}", t.line, t.col
                )
        for c in components:
            if c.name not in weights:
                t = self.toks[-1]
                raise ParseError(f"missing weight for component {c.name!r}", t.line, t.col)
        return RewardProgram(tuple(components), weights)

    def parse_component(self, known: list[str]) -> RewardComponent:
        t = self.next()
        name = t.text
        if name in KEYWORDS:
            raise ParseError(
                f"{name!r} is reserved and cannot name a component", t.line, t.col
            )
        if not COMPONENT_NAME_RE.match(name):
            raise ParseError(f"invalid component name {name!r}", t.line, t.col)
        if name in known:
            raise ParseError(f"duplicate component name {name!r}", t.line, t.col)
        self.expect_op("=")
        body = self.parse_expr(1)
        t = self.peek()
        if t.kind not in ("NEWLINE", "EOF"):
            raise ParseError(
                f"unexpected {describe(t)} after expression", t.line, t.col,
                ("newline",),
            )
        depth = tree_depth(body)
        if depth > MAX_DEPTH:
            raise ParseError(
                f"expression too deep ({depth} > {MAX_DEPTH}) in component {name!r}",
                t.line, t.col,
            )
        return RewardComponent(name, body)

    def parse_weights(self) -> dict[str, float]:
        self.next()  # 'weights'
        self.expect_op(":")
        weights: dict[str, float] = {}
        while True:
            t = self.peek()
            if t.kind != "NAME":
                raise ParseError(
                    f"unexpected {describe(t)} in weights line", t.line, t.col,
                    ("component name",),
                )
            name = self.next().text
            if name in weights:
                raise ParseError(f"duplicate weight entry {name!r}", t.line, t.col)
            self.expect_op("=")
            weights[name] = self.parse_signed_number()
            if self.at_op(","):
                self.next()
                while self.peek().kind == "NEWLINE":  # allow wrapped weights lines
                    self.next()
                continue
            t = self.peek()
            if t.kind in ("NEWLINE", "EOF"):
                return weights
            raise ParseError(
                f"unexpected {describe(t)} in weights line", t.line, t.col,
                ("','", "newline"),
            )

    def parse_signed_number(self) -> float:
        sign = 1.0
        while self.at_op("-"):
            self.next()
            sign = -sign
        t = self.peek()
        if t.kind != "NUMBER":
            raise ParseError(f"unexpected {describe(t)}", t.line, t.col, ("number",))
        value = sign * float(self.next().text)
        if value in (float("inf"), float("-inf")):
            raise ParseError(f"weight {t.text} overflows", t.line, t.col)
        return value

    def parse_expr(self, depth: int) -> Expr:
        self.check_depth(depth)
        node = self.parse_and(depth)
        while self.peek().kind == "NAME" and self.peek().text == "or":
            self.next()
            right = self.parse_and(depth)
            node = self.make(BoolOp, "or", node, right)
        return node

    def parse_and(self, depth: int) -> Expr:
        node = self.parse_not(depth)
        while self.peek().kind == "NAME" and self.peek().text == "and":
            self.next()
            right = self.parse_not(depth)
            node = self.make(BoolOp, "and", node, right)
        return node

    def parse_not(self, depth: int) -> Expr:
        if self.peek().kind == "NAME" and self.peek().text == "not":
            self.next()
            self.check_depth(depth + 1)
            return self.make(Not, self.parse_not(depth + 1))
        return self.parse_comparison(depth)

    def parse_comparison(self, depth: int) -> Expr:
        node = self.parse_additive(depth)
        if self.at_op(*CMP_OPS):
            op = self.next().text
            right = self.parse_additive(depth)
            node = self.make(Cmp, op, node, right)
            if self.at_op(*CMP_OPS):
                raise self.err("comparisons cannot be chained")
        return node

    def parse_additive(self, depth: int) -> Expr:
        node = self.parse_term(depth)
        while self.at_op("+", "-"):
            op = self.next().text
            right = self.parse_term(depth)
            node = self.make(BinOp, op, node, right)
        return node

    def parse_term(self, depth: int) -> Expr:
        node = self.parse_unary(depth)
        while self.at_op("*", "/"):
            op = self.next().text
            right = self.parse_unary(depth)
            node = self.make(BinOp, op, node, right)
        return node

    def parse_unary(self, depth: int) -> Expr:
        if self.at_op("-"):
            self.next()
            self.check_depth(depth + 1)
            operand = self.parse_unary(depth + 1)
            if isinstance(operand, Lit):
                return self.make(Lit, -operand.value)
            return self.make(Neg, operand)
        return self.parse_atom(depth)

    def parse_atom(self, depth: int) -> Expr:
        t = self.peek()
        if t.kind == "NUMBER":
            self.next()
            value = float(t.text)
            if value in (float("inf"), float("-inf")):
                raise ParseError(f"literal {t.text} overflows", t.line, t.col)
            return self.make(Lit, value)
        if self.at_op("("):
            self.next()
            node = self.parse_expr(depth + 1)
            self.expect_op(")")
            return node
        if t.kind == "NAME":
            if t.text in DSL_SOURCES:
                return self.parse_field_ref()
            if t.text in FUNCTIONS:
                return self.parse_call(t.text, depth)
            raise ParseError(
                f"unknown identifier {t.text!r}", t.line, t.col,
                ("number", "cur/prev/course field", "function call", "'('"),
            )
        raise ParseError(
            f"unexpected {describe(t)}", t.line, t.col,
            ("number", "cur/prev/course field", "function call", "'('", "'-'"),
        )

    def parse_field_ref(self) -> Expr:
        src = self.next()
        self.expect_op(".")
        t = self.peek()
        if t.kind != "NAME":
            raise ParseError(f"unexpected {describe(t)}", t.line, t.col, ("field name",))
        fname = self.next().text
        allowed = DSL_SOURCES[src.text]
        if fname not in allowed:
            raise ParseError(
                f"unknown field {src.text}.{fname}", t.line, t.col,
                tuple(sorted(allowed)),
            )
        return self.make(Ref, src.text, fname)

    def parse_call(self, fn: str, depth: int) -> Expr:
        t = self.next()
        self.expect_op("(")
        args: list[Expr] = [self.parse_expr(depth + 1)]
        while self.at_op(","):
            self.next()
            args.append(self.parse_expr(depth + 1))
        self.expect_op(")")
        arity = FUNCTIONS[fn]
        if len(args) != arity:
            raise ParseError(
                f"{fn}() takes {arity} argument{'s' if arity > 1 else ''},"
                f" got {len(args)}",
                t.line, t.col,
            )
        return self.make(Call, fn, tuple(args))

    def check_depth(self, depth: int) -> None:
        # depth counts paren/call/not/unary nesting; small slack over the
        # AST bound allows redundant parentheses, and parse_component
        # re-checks the exact bound on the built tree.
        if depth > MAX_DEPTH + 16:
            t = self.peek()
            raise ParseError(
                f"expression too deeply nested (depth limit {MAX_DEPTH})",
                t.line, t.col,
            )


def describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    if tok.kind == "NEWLINE":
        return "end of line"
    return f"{tok.kind.lower()} {tok.text!r}"


def parse(text: str) -> RewardProgram:
    """Parse program text; raises ParseError with location and expectations."""
    # Descent uses ~10 frames per nesting level; make sure depth-limit
    # programs fail with ParseError, not RecursionError.
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4000))
    try:
        return _Parser(tokenize(text)).parse_program()
    finally:
        sys.setrecursionlimit(old)
