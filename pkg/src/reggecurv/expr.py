"""Scalar expressions in two variables.

Expressions are small immutable trees.  They are parsed from text, printed
back, differentiated symbolically and evaluated on floats or numpy arrays.

Grammar (lowest to highest precedence)::

    sum     := product (('+' | '-') product)*
    product := power (('*' | '/') power)*
    power   := unary ('^' power)?          exponent must fold to an integer
    unary   := '-' unary | primary
    primary := NUMBER | 'x' | 'y' | NAME '(' sum ')' | '(' sum ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

Number = Union[Fraction, float]

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "atan", "log")
VARIABLES = ("x", "y")


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Raised on malformed input.

    Attributes
    ----------
    offset : int
        Byte offset into the UTF-8 encoded source.
    expected : frozenset of str
        Tokens that would have been accepted at ``offset``.
    """

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    """Division by zero, square root or log of a negative number."""


class Expr:
    __slots__ = ()

    # operator sugar so that expressions can be built in code
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n: int):
        return IntPow(self, int(n))

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: Number


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class IntPow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


X = Var("x")
Y = Var("y")
ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    return Const(float(value))


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind, text, offset):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(text: str) -> list[_Token]:
    raw = text.encode("utf-8")
    src = raw.decode("ascii", errors="replace")  # keeps byte offsets aligned
    tokens = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos,
                                  {"number", "identifier", "(", "-"})
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(_Token("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _take(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _expect_op(self, op: str):
        t = self.tok
        if t.kind == "op" and t.text == op:
            return self._take()
        raise ExprSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.offset, {op})

    def parse(self) -> Expr:
        e = self.sum()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset,
                                  {"+", "-", "*", "/", "^", "end of input"})
        return e

    def sum(self) -> Expr:
        e = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._take().text
            rhs = self.product()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def product(self) -> Expr:
        e = self.power()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self._take().text
            rhs = self.power()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def power(self) -> Expr:
        base = self.unary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self._take()
            exp_offset = self.tok.offset
            exponent = simplify(self.power())
            if not (isinstance(exponent, Const) and _is_integer(exponent.value)):
                raise ExprSyntaxError("exponent must be an integer constant", exp_offset,
                                      {"integer"})
            return IntPow(base, int(exponent.value))
        return base

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self._take()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self._take()
            if re.fullmatch(r"\d+", t.text):
                return Const(Fraction(int(t.text)))
            return Const(float(t.text))
        if t.kind == "name":
            self._take()
            if t.text in VARIABLES:
                return Var(t.text)
            if t.text in FUNCTIONS:
                self._expect_op("(")
                arg = self.sum()
                self._expect_op(")")
                return Call(t.text, arg)
            raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.offset,
                                         set(VARIABLES) | set(FUNCTIONS))
        if t.kind == "op" and t.text == "(":
            self._take()
            e = self.sum()
            self._expect_op(")")
            return e
        raise ExprSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.offset,
                              {"number", "identifier", "(", "-"})


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    >>> parse("x^2+y")
    Add(left=IntPow(base=Var(name='x'), exponent=2), right=Var(name='y'))
    """
    return _Parser(text).parse()


# --------------------------------------------------------------- printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, IntPow: 3, Neg: 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        v = e.value
        if v < 0 or (isinstance(v, Fraction) and v.denominator != 1):
            return 0
        return 5
    return _PREC.get(type(e), 5)


def _const_str(v: Number) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
        else:
            s = f"{v.numerator}/{v.denominator}"
    else:
        s = repr(float(v))
        if s in ("inf", "-inf", "nan"):
            raise ExprError(f"cannot print non-finite constant {s}")
    return f"({s})" if v < 0 or "/" in s else s


def to_string(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_string(e))`` rebuilds the same tree."""

    def wrap(sub: Expr, min_prec: int) -> str:
        s = to_string(sub)
        return f"({s})" if _prec(sub) < min_prec else s

    if isinstance(e, Const):
        return _const_str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        return f"{wrap(e.left, 1)}{op}{wrap(e.right, 2)}"
    if isinstance(e, (Mul, Div)):
        op = "*" if isinstance(e, Mul) else "/"
        return f"{wrap(e.left, 2)}{op}{wrap(e.right, 3)}"
    if isinstance(e, IntPow):
        return f"{wrap(e.base, 4)}^{e.exponent}"
    if isinstance(e, Neg):
        return f"-{wrap(e.operand, 4)}"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------- differentiation

def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var``.

    The result is passed through :func:`simplify` to keep trees small.
    """
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return simplify(_diff(e, var))


def _diff(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Add):
        return Add(_diff(e.left, v), _diff(e.right, v))
    if isinstance(e, Sub):
        return Sub(_diff(e.left, v), _diff(e.right, v))
    if isinstance(e, Mul):
        return Add(Mul(_diff(e.left, v), e.right), Mul(e.left, _diff(e.right, v)))
    if isinstance(e, Div):
        num = Sub(Mul(_diff(e.left, v), e.right), Mul(e.left, _diff(e.right, v)))
        return Div(num, IntPow(e.right, 2))
    if isinstance(e, Neg):
        return Neg(_diff(e.operand, v))
    if isinstance(e, IntPow):
        n = e.exponent
        if n == 0:
            return ZERO
        return Mul(Mul(Const(Fraction(n)), IntPow(e.base, n - 1)), _diff(e.base, v))
    if isinstance(e, Call):
        u, du = e.arg, _diff(e.arg, v)
        if e.fn == "sin":
            outer = Call("cos", u)
        elif e.fn == "cos":
            outer = Neg(Call("sin", u))
        elif e.fn == "exp":
            outer = e
        elif e.fn == "sqrt":
            outer = Div(ONE, Mul(Const(Fraction(2)), e))
        elif e.fn == "atan":
            outer = Div(ONE, Add(ONE, IntPow(u, 2)))
        elif e.fn == "log":
            outer = Div(ONE, u)
        else:
            raise ExprError(f"unknown function {e.fn!r}")
        return Mul(outer, du)
    raise TypeError(f"not an expression node: {e!r}")


# ------------------------------------------------------------ simplify

def _is_integer(v: Number) -> bool:
    if isinstance(v, Fraction):
        return v.denominator == 1
    return float(v).is_integer()


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _fold(a: Number, b: Number, op: str) -> Number:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / b
    a, b = float(a), float(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return a / b


def simplify(e: Expr) -> Expr:
    """Constant folding plus the 0/1 identities; value preserving."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        a = simplify(e.operand)
        if isinstance(a, Const):
            return Const(-a.value)
        if isinstance(a, Neg):
            return a.operand
        return Neg(a)
    if isinstance(e, Call):
        a = simplify(e.arg)
        if isinstance(a, Const):
            try:
                return Const(float(_apply_fn(e.fn, float(a.value))))
            except ExprDomainError:
                pass
        return Call(e.fn, a)
    if isinstance(e, IntPow):
        b = simplify(e.base)
        n = e.exponent
        if n == 1:
            return b
        if n == 0:
            return ONE
        if isinstance(b, Const):
            if b.value == 0 and n < 0:
                return IntPow(b, n)
            if isinstance(b.value, Fraction):
                return Const(b.value ** n)
            return Const(float(b.value) ** n)
        return IntPow(b, n)
    a, b = simplify(e.left), simplify(e.right)
    if isinstance(e, Add):
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(_fold(a.value, b.value, "+"))
        if _is_const(a, 0):
            return b
        if _is_const(b, 0):
            return a
        return Add(a, b)
    if isinstance(e, Sub):
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(_fold(a.value, b.value, "-"))
        if _is_const(b, 0):
            return a
        if _is_const(a, 0):
            return simplify(Neg(b))
        return Sub(a, b)
    if isinstance(e, Mul):
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(_fold(a.value, b.value, "*"))
        if _is_const(a, 0) or _is_const(b, 0):
            return ZERO
        if _is_const(a, 1):
            return b
        if _is_const(b, 1):
            return a
        return Mul(a, b)
    if isinstance(e, Div):
        if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
            return Const(_fold(a.value, b.value, "/"))
        if _is_const(b, 1):
            return a
        if _is_const(a, 0) and not _is_const(b, 0):
            # 0/b is 0 wherever b is defined and nonzero
            return ZERO
        return Div(a, b)
    raise TypeError(f"not an expression node: {e!r}")


# ------------------------------------------------------------ evaluation

def _apply_fn(fn: str, a):
    if fn == "sin":
        return np.sin(a)
    if fn == "cos":
        return np.cos(a)
    if fn == "exp":
        return np.exp(a)
    if fn == "atan":
        return np.arctan(a)
    if fn == "sqrt":
        if np.any(np.asarray(a) < 0):
            raise ExprDomainError("sqrt of a negative number")
        return np.sqrt(a)
    if fn == "log":
        if np.any(np.asarray(a) <= 0):
            raise ExprDomainError("log of a non-positive number")
        return np.log(a)
    raise ExprError(f"unknown function {fn!r}")


def _eval(e: Expr, x, y):
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Add):
        return _eval(e.left, x, y) + _eval(e.right, x, y)
    if isinstance(e, Sub):
        return _eval(e.left, x, y) - _eval(e.right, x, y)
    if isinstance(e, Mul):
        return _eval(e.left, x, y) * _eval(e.right, x, y)
    if isinstance(e, Div):
        den = _eval(e.right, x, y)
        if np.any(np.asarray(den) == 0):
            raise ExprDomainError("division by zero")
        return _eval(e.left, x, y) / den
    if isinstance(e, Neg):
        return -_eval(e.operand, x, y)
    if isinstance(e, IntPow):
        b = _eval(e.base, x, y)
        if e.exponent < 0:
            if np.any(np.asarray(b) == 0):
                raise ExprDomainError("division by zero")
            return 1.0 / b ** (-e.exponent)
        return b ** e.exponent
    if isinstance(e, Call):
        return _apply_fn(e.fn, _eval(e.arg, x, y))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, x, y):
    """Evaluate ``e`` at ``(x, y)``.

    ``x`` and ``y`` may be floats or broadcast-compatible arrays; the result
    has their broadcast shape.  Raises :class:`ExprDomainError` instead of
    returning non-finite values.
    """
    if isinstance(e, str):
        e = parse(e)
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(e, x, y)
    out = np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)
    if not np.all(np.isfinite(out)):
        raise ExprDomainError("expression evaluated to a non-finite value")
    return float(out) if scalar else np.array(out)


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg,)):
        return free_variables(e.operand)
    if isinstance(e, IntPow):
        return free_variables(e.base)
    if isinstance(e, Call):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def depth(e: Expr) -> int:
    if isinstance(e, (Const, Var)):
        return 1
    if isinstance(e, Neg):
        return 1 + depth(e.operand)
    if isinstance(e, IntPow):
        return 1 + depth(e.base)
    if isinstance(e, Call):
        return 1 + depth(e.arg)
    return 1 + max(depth(e.left), depth(e.right))


__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Neg", "IntPow", "Call",
    "X", "Y", "parse", "to_string", "differentiate", "simplify", "evaluate",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ExprDomainError",
    "as_expr", "free_variables", "depth",
]
