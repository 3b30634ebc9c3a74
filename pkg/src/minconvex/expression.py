"""A small expression language for scalar fields on R^n.

Grammar (lowest to highest precedence)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := number | "x" index | func "(" expr ")" | "(" expr ")"

``^`` is right-associative and binds tighter than unary minus, so ``-x1^2``
means ``-(x1^2)``.  Error positions are 1-based character offsets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .jet import FUNCTIONS, Jet


class ExpressionError(ValueError):
    """Base class for expression errors that carry a 1-based position."""

    def __init__(self, message, position=None):
        self.message = message
        self.position = position
        where = f" at offset {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class ExpressionSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class DimensionMismatchError(ExpressionError):
    pass


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Const, Var, Neg, Binary, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ExpressionSyntaxError(f"unexpected character {text[i]!r}", i + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start + 1))
        i = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, n):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.n = n

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, val, where = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", where)

    def parse(self):
        node = self.expr()
        kind, val, where = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {val!r}", where)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, val, where = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            m = re.fullmatch(r"x([1-9]\d*)", val)
            if m:
                k = int(m.group(1))
                if self.n is not None and k > self.n:
                    raise DimensionMismatchError(f"variable {val} exceeds dimension {self.n}", where)
                return Var(k)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", where)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"unexpected {found}", where)


def parse_expression(text, n=None):
    """Parse ``text`` into an expression tree; ``n`` bounds variable indices."""
    return _Parser(text, n).parse()


# -- printing ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt_const(c):
    if np.isfinite(c) and float(c).is_integer() and abs(c) < 1e15:
        return str(int(c))
    return repr(float(c))


def to_string(node):
    """Print with the fewest parentheses that still re-parse to ``node``."""
    if isinstance(node, Const):
        if node.value < 0:
            return _fmt_neg_const(node.value)
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Call):
        return f"{node.name}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[node.op]
    left = to_string(node.left)
    right = to_string(node.right)
    if node.op == "^":
        if _prec(node.left) < 5 or _negative_const(node.left):
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


def _negative_const(node):
    return isinstance(node, Const) and node.value < 0


def _fmt_neg_const(c):
    # constants built programmatically may be negative; print as grouped negation
    return f"(-{_fmt_const(-c)})"


# -- evaluation -------------------------------------------------------------


def max_variable(node):
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Const):
        return 0
    if isinstance(node, (Neg, Call)):
        return max_variable(node.operand if isinstance(node, Neg) else node.arg)
    return max(max_variable(node.left), max_variable(node.right))


def evaluate_jet(node, xs, m, n):
    """Evaluate ``node`` on coordinate jets ``xs``."""
    if isinstance(node, Const):
        return Jet.constant(node.value, m, n)
    if isinstance(node, Var):
        return xs[node.index - 1]
    if isinstance(node, Neg):
        return -evaluate_jet(node.operand, xs, m, n)
    if isinstance(node, Call):
        return FUNCTIONS[node.name](evaluate_jet(node.arg, xs, m, n))
    a = evaluate_jet(node.left, xs, m, n)
    if node.op == "^" and isinstance(node.right, Const):
        return a ** node.right.value
    if node.op == "^" and isinstance(node.right, Neg) and isinstance(node.right.operand, Const):
        return a ** (-node.right.operand.value)
    b = evaluate_jet(node.right, xs, m, n)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b
