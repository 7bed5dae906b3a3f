"""Coefficient expressions in x and y.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' factor)?
    atom   := number | 'x' | 'y' | 'pi' | func '(' expr ')' | '(' expr ')' | '-' atom
    func   := sin | cos | exp | sqrt | abs

``^`` is right-associative.  Because unary minus lives in ``atom``, ``-x^2``
parses as ``(-x)^2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ExpressionSyntaxError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[off]!r}", off)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class Node:
    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            out = self.eval(x, y)
        out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)
        if not np.all(np.isfinite(out)):
            raise EvaluationError(f"expression {self} is not finite at some evaluation point")
        return np.array(out)


@dataclass(frozen=True)
class Num(Node):
    value: float

    def eval(self, x, y):
        return self.value

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Node):
    name: str

    def eval(self, x, y):
        return x if self.name == "x" else y

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    arg: Node

    def eval(self, x, y):
        return -self.arg.eval(x, y)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def eval(self, x, y):
        a = self.left.eval(x, y)
        b = self.right.eval(x, y)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvaluationError(f"division by zero in {self}")
            return a / b
        return np.power(a, b)

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def eval(self, x, y):
        a = self.arg.eval(x, y)
        if self.func == "sqrt" and np.any(np.asarray(a) < 0):
            raise EvaluationError(f"sqrt of negative value in {self}")
        return FUNCTIONS[self.func](a)

    def __str__(self):
        return f"{self.func}({self.arg})"


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text:
            raise ExpressionSyntaxError(f"expected {text!r}", self.tok.offset)
        return self.advance()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        base = self.atom()
        if self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in ("x", "y"):
                return Var(t.text)
            if t.text == "pi":
                return Num(math.pi)
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            raise ExpressionSyntaxError(f"unknown identifier {t.text!r}", t.offset)
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if t.text == "-":
            self.advance()
            return Neg(self.atom())
        if t.kind == "end":
            raise ExpressionSyntaxError("unexpected end of expression", t.offset)
        raise ExpressionSyntaxError(f"unexpected {t.text!r}", t.offset)


def parse(text):
    """Parse ``text`` into an expression tree callable as ``tree(x, y)``."""
    return _Parser(text).parse()
