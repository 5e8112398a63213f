"""Tiny arithmetic grammar for field definitions in config files.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          right associative, binds tighter than unary minus
    atom   := number | x1 | x2 | pi | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | exp | abs

Evaluation is vectorised over numpy arrays of coordinates.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


class ExpressionError(ValueError):
    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} at column {position + 1}")
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def tokenize(text: str):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, sym = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            tokens.append(("num", num, start))
        elif name is not None:
            tokens.append(("name", name, start))
        else:
            if sym not in "+-*/^()":
                raise ExpressionError(f"unexpected character {sym!r}", start)
            tokens.append(("op", sym, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, sym):
        kind, val, pos = self.take()
        if kind != "op" or val != sym:
            raise ExpressionError(f"expected {sym!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in ("x1", "x2"):
                return Var(val)
            if val == "pi":
                return Num(float(np.pi))
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExpressionError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", pos)


def _eval(node, x1, x2):
    if isinstance(node, Num):
        return np.full(np.shape(x1), node.value)
    if isinstance(node, Var):
        return np.asarray(x1 if node.name == "x1" else x2, dtype=float)
    if isinstance(node, Neg):
        return -_eval(node.arg, x1, x2)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, x1, x2))
    left, right = _eval(node.left, x1, x2), _eval(node.right, x1, x2)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(right == 0):
            raise ZeroDivisionError("division by zero in expression")
        return left / right
    return np.power(left, right)


class Expression:
    """Parsed field ``f(x1, x2)``; callable on scalars or arrays."""

    def __init__(self, text: str, validate: bool = True):
        self.text = text.strip()
        if not self.text:
            raise ExpressionError("empty expression")
        self.tree = _Parser(self.text).parse()
        if validate:
            self.validate()

    def validate(self, n: int = 64) -> None:
        """Reject expressions that divide by zero (or overflow) on an n x n grid of [0,1]^2."""
        s = np.linspace(0.0, 1.0, n)
        x1, x2 = np.meshgrid(s, s)
        try:
            with np.errstate(all="raise"):
                _eval(self.tree, x1, x2)
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise ExpressionError(f"{self.text!r} is not finite on [0,1]^2: {exc}") from None

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = _eval(self.tree, x1, x2)
        return out if out.ndim else float(out)

    def is_constant(self) -> bool:
        return isinstance(self.tree, Num) or (isinstance(self.tree, Neg) and isinstance(self.tree.arg, Num))

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text: str, validate: bool = True) -> Expression:
    return Expression(text, validate)
