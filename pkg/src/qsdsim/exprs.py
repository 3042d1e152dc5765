"""A small text language for building operators.

Grammar (left to right, products bind tighter than sums):

    expr      := term (('+' | '-') term)*
    term      := factor ('*' factor)*
    factor    := scalar | primitive | '(' expr ')'
    primitive := a | adag | n | q | p | id
    scalar    := float literal, optional 'i' suffix for an imaginary value

Expressions are dimension independent; evaluation picks the truncation.
A scalar combined with operators through '+' or '-' (or standing alone)
means that multiple of the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import fock
from .errors import ExpressionError
from .fock import OperatorMatrix

_PRIMITIVES = {
    "a": fock.annihilation,
    "adag": fock.creation,
    "n": fock.number,
    "q": fock.position,
    "p": fock.momentum,
    "id": fock.identity,
}

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<sym>[+\-*()])"
    r")"
)


@dataclass(frozen=True)
class Scalar:
    value: complex


@dataclass(frozen=True)
class Primitive:
    name: str


@dataclass(frozen=True)
class Product:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sum:
    left: "Node"
    right: "Node"
    negate_right: bool = False


Node = Scalar | Primitive | Product | Sum


@dataclass(frozen=True)
class OperatorExpr:
    """A parsed operator expression; evaluate with eval_expr."""

    root: Node
    source: str


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            # skip over pure whitespace tail
            if text[pos:].strip() == "":
                break
            bad = text[pos:].lstrip()
            col = len(text) - len(bad)
            raise ExpressionError(f"unexpected character {bad[0]!r}", col)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        kind, value, col = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {value!r} after expression", col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "sym" and self.peek()[1] in "+-":
            _, sym, _ = self.advance()
            node = Sum(node, self.term(), negate_right=(sym == "-"))
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] == "sym" and self.peek()[1] == "*":
            self.advance()
            node = Product(node, self.factor())
        return node

    def factor(self) -> Node:
        kind, value, col = self.advance()
        if kind == "num":
            if value.endswith("i"):
                return Scalar(complex(0.0, float(value[:-1])))
            return Scalar(complex(float(value)))
        if kind == "name":
            if value not in _PRIMITIVES:
                allowed = ", ".join(sorted(_PRIMITIVES))
                raise ExpressionError(f"unknown primitive {value!r}; expected one of {allowed}", col)
            return Primitive(value)
        if kind == "sym" and value == "(":
            node = self.expr()
            kind, value, col = self.advance()
            if not (kind == "sym" and value == ")"):
                raise ExpressionError("expected ')'", col)
            return node
        if kind == "end":
            raise ExpressionError("unexpected end of expression", col)
        raise ExpressionError(f"unexpected {value!r}", col)


def parse_expr(text: str) -> OperatorExpr:
    """Parse source text into an OperatorExpr, or raise ExpressionError."""
    if not isinstance(text, str) or text.strip() == "":
        raise ExpressionError("empty operator expression")
    return OperatorExpr(_Parser(text).parse(), text)


def _eval(node: Node, dim: int):
    """Evaluate to either a complex scalar or a dense matrix."""
    if isinstance(node, Scalar):
        return node.value
    if isinstance(node, Primitive):
        return _PRIMITIVES[node.name](dim).entries
    if isinstance(node, Product):
        left = _eval(node.left, dim)
        right = _eval(node.right, dim)
        if isinstance(left, complex) or isinstance(right, complex):
            return left * right
        return left @ right
    if isinstance(node, Sum):
        left = _eval(node.left, dim)
        right = _eval(node.right, dim)
        if isinstance(left, complex) and not isinstance(right, complex):
            left = left * np.eye(dim, dtype=np.complex128)
        elif isinstance(right, complex) and not isinstance(left, complex):
            right = right * np.eye(dim, dtype=np.complex128)
        return left - right if node.negate_right else left + right
    raise ExpressionError(f"cannot evaluate node {node!r}")


def eval_expr(expr: OperatorExpr | str, dim: int, label: str | None = None) -> OperatorMatrix:
    """Evaluate an expression (or source text) to a dim x dim operator.

    A purely scalar expression becomes that multiple of the identity.
    """
    if isinstance(expr, str):
        expr = parse_expr(expr)
    value = _eval(expr.root, dim)
    if isinstance(value, complex):
        value = value * np.eye(dim, dtype=np.complex128)
    return OperatorMatrix(dim, value, label=label)
