"""Scalar expression trees: parsing, evaluation, symbolic differentiation.

Expressions are immutable trees built from constants, named variables,
the binary operators ``+ - * /``, powers with a constant exponent, the
unary functions ``sin cos exp log sqrt abs sign`` and the two-argument
``min``/``max``.  They carry the bound functions of region definitions,
chart components and form coefficients, so everything downstream
(Jacobians, pullbacks, face values) differentiates through this module.

Grammar (infix, ``^`` binds tightest and is right-associative)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          exponent must fold to a constant
    atom   := NUMBER | 'pi' | NAME '(' expr (',' expr)* ')' | NAME | '(' expr ')'

Conventional variable names are ``x1..xk`` (region/chart domain),
``y1..yn`` (ambient coordinates) and ``t1..tk`` (cube parameters), but any
identifier is accepted.  ``pi`` is reserved for the constant.

Branch rules (these make differentiation total): ``sign(u)`` is 1 for
u >= 0 and -1 otherwise, with derivative 0; ``abs`` differentiates to
``sign(u)*u'``; ``min(a,b)`` and ``max(a,b)`` differentiate along the
``a`` branch at ties.  Ties sit on measure-zero sets that interior
quadrature nodes avoid.

The only rewrites ever applied are constant folding and the 0/1
identities (``e+0``, ``e*1``, ``e*0``, ``e/1``, ``e^0``, ``e^1``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

from .errors import DomainError, ExpressionSyntaxError, UnboundVariableError

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Call",
    "Min",
    "Max",
    "Environment",
    "parse",
    "evaluate",
    "evaluate_array",
    "differentiate",
    "to_string",
    "free_variables",
]

Environment = Mapping[str, float]

UNARY_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "sign")


class Expression:
    """Base class for all expression nodes.  Immutable and hashable."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, exponent):
        return pow_const(self, float(exponent))

    def __neg__(self):
        return mul(Const(-1.0), self)

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, slots=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Expression):
    name: str


@dataclass(frozen=True, slots=True)
class Add(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Sub(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Mul(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Div(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Pow(Expression):
    base: Expression
    exponent: float


@dataclass(frozen=True, slots=True)
class Call(Expression):
    func: str
    arg: Expression


@dataclass(frozen=True, slots=True)
class Min(Expression):
    left: Expression
    right: Expression


@dataclass(frozen=True, slots=True)
class Max(Expression):
    left: Expression
    right: Expression


def _coerce(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


# ---------------------------------------------------------------------------
# smart constructors: constant folding plus 0/1 identities


def _const_val(e: Expression):
    return e.value if isinstance(e, Const) else None


def add(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None:
        return Const(av + bv)
    if av == 0.0:
        return b
    if bv == 0.0:
        return a
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None:
        return Const(av - bv)
    if bv == 0.0:
        return a
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None:
        return Const(av * bv)
    if av == 0.0 or bv == 0.0:
        return Const(0.0)
    if av == 1.0:
        return b
    if bv == 1.0:
        return a
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None and bv != 0.0:
        return Const(av / bv)
    if bv == 1.0:
        return a
    return Div(a, b)


def pow_const(base: Expression, exponent: float) -> Expression:
    if exponent == 0.0:
        return Const(1.0)
    if exponent == 1.0:
        return base
    bv = _const_val(base)
    if bv is not None:
        try:
            return Const(_pow_scalar(bv, exponent, None))
        except DomainError:
            pass
    return Pow(base, exponent)


def call(func: str, arg: Expression) -> Expression:
    if func not in UNARY_FUNCTIONS:
        raise ValueError(f"unknown function '{func}'")
    av = _const_val(arg)
    if av is not None:
        try:
            return Const(_call_scalar(func, av, None))
        except DomainError:
            pass
    return Call(func, arg)


def minimum(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None:
        return Const(min(av, bv))
    return Min(a, b)


def maximum(a: Expression, b: Expression) -> Expression:
    av, bv = _const_val(a), _const_val(b)
    if av is not None and bv is not None:
        return Const(max(av, bv))
    return Max(a, b)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character '{text[pos]}'", pos)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect_op(self, symbol: str) -> _Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != symbol:
            raise ExpressionSyntaxError(f"expected '{symbol}'", tok.pos)
        return self.advance()

    def parse(self) -> Expression:
        e = self.parse_sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected token '{tok.text}'", tok.pos)
        return e

    def parse_sum(self) -> Expression:
        e = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.parse_term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def parse_term(self) -> Expression:
        e = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.parse_unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def parse_unary(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return mul(Const(-1.0), self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            exponent = self.parse_unary()
            if not isinstance(exponent, Const):
                raise ExpressionSyntaxError(
                    "power exponent must fold to a constant", tok.pos
                )
            return pow_const(base, exponent.value)
        return base

    def parse_atom(self) -> Expression:
        tok = self.advance()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.parse_call(tok)
            if tok.text == "pi":
                return Const(math.pi)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            e = self.parse_sum()
            self.expect_op(")")
            return e
        if tok.kind == "end":
            raise ExpressionSyntaxError("expected expression", tok.pos)
        raise ExpressionSyntaxError(f"unexpected token '{tok.text}'", tok.pos)

    def parse_call(self, name_tok: _Token) -> Expression:
        name = name_tok.text
        if name not in UNARY_FUNCTIONS and name not in ("min", "max"):
            raise ExpressionSyntaxError(f"unknown function '{name}'", name_tok.pos)
        self.expect_op("(")
        args = [self.parse_sum()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.parse_sum())
        self.expect_op(")")
        wanted = 2 if name in ("min", "max") else 1
        if len(args) != wanted:
            raise ExpressionSyntaxError(
                f"{name}() takes {wanted} argument(s), got {len(args)}", name_tok.pos
            )
        if name == "min":
            return minimum(*args)
        if name == "max":
            return maximum(*args)
        return call(name, args[0])


def parse(text: str) -> Expression:
    """Parse expression text into an :class:`Expression` tree."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

# precedence levels used when re-inserting parentheses
_PREC_SUM, _PREC_TERM, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expression) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_SUM
    if isinstance(e, Mul) and _const_val(e.left) == -1.0:
        return _PREC_UNARY
    if isinstance(e, (Mul, Div)):
        return _PREC_TERM
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _PREC_UNARY
    return _PREC_ATOM


def _fmt_float(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _wrap(e: Expression, min_prec: int) -> str:
    s = to_string(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_string(e: Expression) -> str:
    """Canonical printable form; ``parse(to_string(e))`` rebuilds ``e``."""
    if isinstance(e, Const):
        return _fmt_float(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Add):
        return f"{_wrap(e.left, _PREC_SUM)} + {_wrap(e.right, _PREC_SUM + 1)}"
    if isinstance(e, Sub):
        return f"{_wrap(e.left, _PREC_SUM)} - {_wrap(e.right, _PREC_SUM + 1)}"
    if isinstance(e, Mul):
        if _const_val(e.left) == -1.0:
            return f"-{_wrap(e.right, _PREC_POW)}"
        return f"{_wrap(e.left, _PREC_TERM)} * {_wrap(e.right, _PREC_TERM + 1)}"
    if isinstance(e, Div):
        return f"{_wrap(e.left, _PREC_TERM)} / {_wrap(e.right, _PREC_TERM + 1)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _PREC_ATOM)}^{_fmt_float(e.exponent)}"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Min):
        return f"min({to_string(e.left)}, {to_string(e.right)})"
    if isinstance(e, Max):
        return f"max({to_string(e.left)}, {to_string(e.right)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expression) -> frozenset[str]:
    names: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, (Add, Sub, Mul, Div, Min, Max)):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, Call):
            stack.append(node.arg)
    return frozenset(names)


# ---------------------------------------------------------------------------
# evaluation


def _pow_scalar(base: float, p: float, node) -> float:
    if base < 0.0 and not p.is_integer():
        raise DomainError(
            "fractional power of a negative base",
            to_string(node) if node is not None else f"{base}^{p}",
        )
    if base == 0.0 and p < 0.0:
        raise DomainError(
            "zero raised to a negative power",
            to_string(node) if node is not None else f"{base}^{p}",
        )
    try:
        return math.pow(base, p)
    except OverflowError:
        return math.inf


def _call_scalar(func: str, v: float, node) -> float:
    if func == "sin":
        return math.sin(v)
    if func == "cos":
        return math.cos(v)
    if func == "exp":
        try:
            return math.exp(v)
        except OverflowError:
            return math.inf
    if func == "log":
        if v <= 0.0:
            raise DomainError(
                "log of a non-positive argument",
                to_string(node) if node is not None else f"log({v})",
            )
        return math.log(v)
    if func == "sqrt":
        if v < 0.0:
            raise DomainError(
                "sqrt of a negative argument",
                to_string(node) if node is not None else f"sqrt({v})",
            )
        return math.sqrt(v)
    if func == "abs":
        return abs(v)
    if func == "sign":
        return 1.0 if v >= 0.0 else -1.0
    raise ValueError(f"unknown function '{func}'")


def evaluate(e: Expression, env: Environment) -> float:
    """Evaluate at a point.  Every free variable must be bound in ``env``.

    Raises :class:`UnboundVariableError` for missing variables and
    :class:`DomainError` (naming the offending subexpression) for
    log/sqrt of negatives, division by zero and bad powers.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Add):
        return evaluate(e.left, env) + evaluate(e.right, env)
    if isinstance(e, Sub):
        return evaluate(e.left, env) - evaluate(e.right, env)
    if isinstance(e, Mul):
        return evaluate(e.left, env) * evaluate(e.right, env)
    if isinstance(e, Div):
        denom = evaluate(e.right, env)
        if denom == 0.0:
            raise DomainError("division by zero", to_string(e))
        return evaluate(e.left, env) / denom
    if isinstance(e, Pow):
        return _pow_scalar(evaluate(e.base, env), e.exponent, e)
    if isinstance(e, Call):
        return _call_scalar(e.func, evaluate(e.arg, env), e)
    if isinstance(e, Min):
        return min(evaluate(e.left, env), evaluate(e.right, env))
    if isinstance(e, Max):
        return max(evaluate(e.left, env), evaluate(e.right, env))
    raise TypeError(f"not an expression node: {e!r}")


ArrayLike = Union[float, np.ndarray]


def evaluate_array(e: Expression, env: Mapping[str, ArrayLike], *, guarded: bool = False) -> ArrayLike:
    """Vectorized evaluation over numpy arrays (scalars broadcast).

    In strict mode (default) domain violations raise :class:`DomainError`
    exactly as the scalar evaluator does.  In guarded mode IEEE semantics
    apply instead: out-of-domain elements become nan/inf and propagate.
    Guarded mode backs face evaluation, where collapsed-bound points are
    annihilated by exact-zero Jacobian factors downstream; any nan that
    survives to an integrand value is still reported as an error.
    """
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Add):
        return evaluate_array(e.left, env, guarded=guarded) + evaluate_array(e.right, env, guarded=guarded)
    if isinstance(e, Sub):
        return evaluate_array(e.left, env, guarded=guarded) - evaluate_array(e.right, env, guarded=guarded)
    if isinstance(e, Mul):
        return evaluate_array(e.left, env, guarded=guarded) * evaluate_array(e.right, env, guarded=guarded)
    if isinstance(e, Div):
        num = evaluate_array(e.left, env, guarded=guarded)
        denom = evaluate_array(e.right, env, guarded=guarded)
        if guarded:
            with np.errstate(divide="ignore", invalid="ignore"):
                return num / denom
        if np.any(np.asarray(denom) == 0.0):
            raise DomainError("division by zero", to_string(e))
        return num / denom
    if isinstance(e, Pow):
        base = evaluate_array(e.base, env, guarded=guarded)
        p = e.exponent
        if guarded:
            with np.errstate(all="ignore"):
                return np.power(base, p)
        b = np.asarray(base)
        if not p.is_integer() and np.any(b < 0.0):
            raise DomainError("fractional power of a negative base", to_string(e))
        if p < 0.0 and np.any(b == 0.0):
            raise DomainError("zero raised to a negative power", to_string(e))
        with np.errstate(over="ignore"):
            return np.power(base, p)
    if isinstance(e, Call):
        arg = evaluate_array(e.arg, env, guarded=guarded)
        return _call_array(e.func, arg, e, guarded)
    if isinstance(e, Min):
        return np.minimum(
            evaluate_array(e.left, env, guarded=guarded),
            evaluate_array(e.right, env, guarded=guarded),
        )
    if isinstance(e, Max):
        return np.maximum(
            evaluate_array(e.left, env, guarded=guarded),
            evaluate_array(e.right, env, guarded=guarded),
        )
    raise TypeError(f"not an expression node: {e!r}")


def _call_array(func: str, v: ArrayLike, node: Expression, guarded: bool) -> ArrayLike:
    a = np.asarray(v, dtype=float)
    if func == "sin":
        return np.sin(a)
    if func == "cos":
        return np.cos(a)
    if func == "exp":
        with np.errstate(over="ignore"):
            return np.exp(a)
    if func == "log":
        if guarded:
            with np.errstate(all="ignore"):
                return np.log(a)
        if np.any(a <= 0.0):
            raise DomainError("log of a non-positive argument", to_string(node))
        return np.log(a)
    if func == "sqrt":
        if guarded:
            with np.errstate(all="ignore"):
                return np.sqrt(a)
        if np.any(a < 0.0):
            raise DomainError("sqrt of a negative argument", to_string(node))
        return np.sqrt(a)
    if func == "abs":
        return np.abs(a)
    if func == "sign":
        out = np.where(a >= 0.0, 1.0, -1.0)
        return np.where(np.isnan(a), a, out)
    raise ValueError(f"unknown function '{func}'")


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expression, var: str) -> Expression:
    """Symbolic partial derivative with respect to ``var``.

    Total on the whole grammar: ``abs`` uses the sign branch, ``min``/
    ``max`` follow the documented a-branch at ties (encoded through
    ``sign``, which is 1 at 0), and ``sign`` itself differentiates to 0.
    """
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0) if e.name == var else Const(0.0)
    if isinstance(e, Add):
        return add(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Sub):
        return sub(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Mul):
        da, db = differentiate(e.left, var), differentiate(e.right, var)
        return add(mul(da, e.right), mul(e.left, db))
    if isinstance(e, Div):
        da, db = differentiate(e.left, var), differentiate(e.right, var)
        num = sub(mul(da, e.right), mul(e.left, db))
        return div(num, pow_const(e.right, 2.0))
    if isinstance(e, Pow):
        du = differentiate(e.base, var)
        return mul(mul(Const(e.exponent), pow_const(e.base, e.exponent - 1.0)), du)
    if isinstance(e, Call):
        du = differentiate(e.arg, var)
        u = e.arg
        if e.func == "sin":
            return mul(call("cos", u), du)
        if e.func == "cos":
            return mul(mul(Const(-1.0), call("sin", u)), du)
        if e.func == "exp":
            return mul(call("exp", u), du)
        if e.func == "log":
            return div(du, u)
        if e.func == "sqrt":
            return div(du, mul(Const(2.0), call("sqrt", u)))
        if e.func == "abs":
            return mul(call("sign", u), du)
        if e.func == "sign":
            return Const(0.0)
        raise ValueError(f"unknown function '{e.func}'")
    if isinstance(e, (Min, Max)):
        da, db = differentiate(e.left, var), differentiate(e.right, var)
        # branch selector: +1 picks da, -1 picks db; sign(0)=+1 gives the
        # a-branch at ties for both min and max
        gap = sub(e.right, e.left) if isinstance(e, Min) else sub(e.left, e.right)
        sel = call("sign", gap)
        return mul(Const(0.5), add(add(da, db), mul(sel, sub(da, db))))
    raise TypeError(f"not an expression node: {e!r}")


def walk(e: Expression) -> Iterator[Expression]:
    """Yield every node of the tree (preorder)."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (Add, Sub, Mul, Div, Min, Max)):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, Call):
            stack.append(node.arg)
