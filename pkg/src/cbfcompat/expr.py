"""Scalar expressions over the state vector.

Dynamics, barriers and class-K gains are written in a small closed grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' INT)*          # right-associative, INT >= 0
    atom   := NUMBER | 'x' INDEX | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'sin' | 'cos' | 'exp' | 'sqrt'

Variables are 1-based (``x1 .. xn``).  ``^`` binds tighter than unary minus,
so ``-x1^2`` is ``-(x1^2)``.

Every node is an immutable dataclass.  :func:`evaluate` accepts either a
single point of shape ``(n,)`` or a batch of points of shape ``(n, K)`` and
broadcasts through numpy, which is how the checker assembles a whole
worklist at once.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Func",
    "ExprSyntaxError",
    "EvaluationError",
    "parse",
    "evaluate",
    "differentiate",
    "gradient",
    "substitute",
    "to_string",
    "variables",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ExprSyntaxError(ValueError):
    """Raised for malformed expression text; carries the character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}" + (f" in {text!r}" if text else ""))


class EvaluationError(ArithmeticError):
    """Division by zero or sqrt of a negative number during evaluation."""


# --------------------------------------------------------------------------- #
# AST
# --------------------------------------------------------------------------- #


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=True, repr=True)
class Func(Expr):
    name: str
    arg: Expr


def _lift(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(float(value))


# --------------------------------------------------------------------------- #
# Simplifying constructors
# --------------------------------------------------------------------------- #


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base: Expr, k: int) -> Expr:
    if k == 0:
        return Const(1.0)
    if k == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**k)
    return Pow(base, k)


# --------------------------------------------------------------------------- #
# Parsing
# --------------------------------------------------------------------------- #

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, names: Mapping[str, int] | None):
        self.text = text
        self.n = n
        self.names = dict(names or {})
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "number":
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            left = BinOp(op, left, self.factor())
        return left

    def factor(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        exponents = []
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            tok = self.peek()
            if tok[0] == "op" and tok[1] == "-":
                raise self.error("exponent must be a non-negative integer")
            if tok[0] != "number":
                raise self.error("exponent must be a non-negative integer literal")
            if not re.fullmatch(r"\d+", tok[1]):
                raise self.error(f"exponent must be a non-negative integer, got {tok[1]!r}")
            self.advance()
            exponents.append(int(tok[1]))
        if not exponents:
            return base
        # right-associative: a^b^c = a^(b^c), all exponents are literals
        k = exponents[-1]
        for e in reversed(exponents[:-1]):
            k = e**k
        return Pow(base, k)

    def atom(self) -> Expr:
        tok = self.peek()
        kind, value, pos = tok
        if kind == "number":
            self.advance()
            return Const(float(value))
        if kind == "name":
            self.advance()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            if value in self.names:
                return Var(self.names[value])
            m = re.fullmatch(r"x(\d+)", value)
            if m is None:
                raise self.error(f"unknown identifier {value!r}", tok)
            j = int(m.group(1))
            if not 1 <= j <= self.n:
                raise self.error(f"variable index out of range: {value} (state dimension {self.n})", tok)
            return Var(j)
        if kind == "op" and value == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"unexpected {value or 'end of input'!r}")


def parse(text: str, n: int, names: Mapping[str, int] | None = None) -> Expr:
    """Parse ``text`` into an expression over ``x1 .. xn``.

    ``names`` optionally maps extra identifiers to variable indices (the
    class-K parser uses ``{"v": 1}``).
    """
    if not isinstance(text, str):
        raise TypeError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, n, names).parse()


# --------------------------------------------------------------------------- #
# Printing
# --------------------------------------------------------------------------- #

def to_string(e: Expr) -> str:
    """Render ``e`` in the input grammar; ``parse(to_string(e))`` rebuilds it."""
    return _fmt(e, 0)


# binding strength of each node kind; a child is parenthesized when weaker
# than the slot it sits in
def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 if e.op in "+-" else 2
    if isinstance(e, Neg) or (isinstance(e, Const) and math.copysign(1.0, e.value) < 0):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _fmt(e: Expr, slot: int) -> str:
    s = _fmt_bare(e)
    return f"({s})" if _level(e) < slot else s


def _fmt_bare(e: Expr) -> str:
    if isinstance(e, Const):
        if not math.isfinite(e.value):
            raise ValueError(f"cannot print non-finite constant {e.value}")
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Func):
        return f"{e.name}({_fmt(e.arg, 0)})"
    if isinstance(e, Neg):
        return "-" + _fmt(e.arg, 3)
    if isinstance(e, Pow):
        return f"{_fmt(e.base, 5)}^{e.exponent}"
    if isinstance(e, BinOp):
        p = 1 if e.op in "+-" else 2
        return f"{_fmt(e.left, p)} {e.op} {_fmt(e.right, p + 1)}"
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------- #
# Evaluation
# --------------------------------------------------------------------------- #

ArrayLike = Union[float, np.ndarray]


def evaluate(e: Expr, x) -> ArrayLike:
    """Evaluate ``e`` at ``x``.

    ``x`` has shape ``(n,)`` for a single point (returns a float) or
    ``(n, K)`` for ``K`` points (returns an array of shape ``(K,)``).
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        value = _eval(e, x)
    if x.ndim == 1:
        return float(value)
    return np.broadcast_to(np.asarray(value, dtype=float), x.shape[1:]).copy()


def _eval(e: Expr, x: np.ndarray):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return x[e.index - 1]
    if isinstance(e, BinOp):
        a = _eval(e.left, x)
        b = _eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise EvaluationError(f"division by zero in {to_string(e)}")
        return a / b
    if isinstance(e, Neg):
        return -_eval(e.arg, x)
    if isinstance(e, Pow):
        base = _eval(e.base, x)
        return np.power(base, e.exponent) if e.exponent else np.ones_like(base, dtype=float)
    if isinstance(e, Func):
        a = _eval(e.arg, x)
        if e.name == "sin":
            return np.sin(a)
        if e.name == "cos":
            return np.cos(a)
        if e.name == "exp":
            return np.exp(a)
        if np.any(np.asarray(a) < 0.0):
            raise EvaluationError(f"sqrt of a negative number in {to_string(e)}")
        return np.sqrt(a)
    raise TypeError(f"unknown node {e!r}")


# --------------------------------------------------------------------------- #
# Symbolic differentiation and substitution
# --------------------------------------------------------------------------- #


def differentiate(e: Expr, j: int) -> Expr:
    """Partial derivative of ``e`` with respect to ``x_j`` (light simplification only)."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.index == j else 0.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, j))
    if isinstance(e, BinOp):
        da = differentiate(e.left, j)
        db = differentiate(e.right, j)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        # quotient rule
        if _is_const(db, 0.0):
            return div(da, e.right)
        return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return Const(0.0)
        db = differentiate(e.base, j)
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Func):
        da = differentiate(e.arg, j)
        if _is_const(da, 0.0):
            return Const(0.0)
        if e.name == "sin":
            return mul(Func("cos", e.arg), da)
        if e.name == "cos":
            return mul(neg(Func("sin", e.arg)), da)
        if e.name == "exp":
            return mul(e, da)
        return div(da, mul(Const(2.0), e))
    raise TypeError(f"unknown node {e!r}")


def gradient(e: Expr, n: int) -> list[Expr]:
    return [differentiate(e, j) for j in range(1, n + 1)]


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace variables by expressions (used to compose class-K gains with h)."""
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    raise TypeError(f"unknown node {e!r}")


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Func)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.left) | variables(e.right)
