"""Parsing and evaluation of one-variable real expressions.

The grammar is deliberately small: arithmetic (+ - * / ^), the function
set sqrt/exp/log/sin/cos/abs/pow, numeric literals and the named
constants pi and e.  Parsed expressions evaluate on scalars or numpy
arrays and carry optional positivity/parity declarations that callers
can spot-check but must never assume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

__all__ = [
    "ExprSyntaxError",
    "EvalDomainError",
    "RealFunction",
    "parse_function",
    "from_callable",
]

_FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "abs", "pow", "sign")
_CONSTANTS = {"pi": math.pi, "e": math.e}
_POSITIVITY = ("strictly-positive", "nonnegative", "unknown")
_PARITY = ("even", "odd", "none")


class ExprSyntaxError(ValueError):
    """Raised on malformed expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalDomainError(ArithmeticError):
    """Raised when evaluation produces a non-finite value.

    The offending abscissa is attached so integration drivers can report
    where an integrand left its domain.
    """

    def __init__(self, message: str, location: float):
        super().__init__(f"{message} (near x = {location!r})")
        self.location = location


# ---------------------------------------------------------------------------
# tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | lparen | rparen | comma | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_exp = False
            while j < n:
                cj = text[j]
                if cj.isdigit() or cj == ".":
                    j += 1
                elif cj in "eE" and not seen_exp:
                    # exponent part only when followed by digits or a sign
                    if j + 1 < n and (text[j + 1].isdigit() or text[j + 1] in "+-"):
                        seen_exp = True
                        j += 2
                    else:
                        break
                else:
                    break
            tokens.append(_Token("num", text[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("name", text[i:j], i))
            i = j
            continue
        if text.startswith("**", i):
            tokens.append(_Token("op", "^", i))
            i += 2
            continue
        if c in "+-*/^":
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, i))
            i += 1
            continue
        if c == ",":
            tokens.append(_Token("comma", c, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# AST nodes


class _Node:
    def eval(self, x):  # pragma: no cover - interface stub
        raise NotImplementedError

    def diff(self) -> "_Node":  # pragma: no cover - interface stub
        raise NotImplementedError

    def text(self) -> str:  # pragma: no cover - interface stub
        raise NotImplementedError


@dataclass(frozen=True)
class _Num(_Node):
    value: float

    def eval(self, x):
        return self.value

    def diff(self):
        return _Num(0.0)

    def text(self):
        return format(self.value, ".17g")


@dataclass(frozen=True)
class _Var(_Node):
    name: str

    def eval(self, x):
        return x

    def diff(self):
        return _Num(1.0)

    def text(self):
        return self.name


@dataclass(frozen=True)
class _Bin(_Node):
    op: str
    left: _Node
    right: _Node

    def eval(self, x):
        a = self.left.eval(x)
        b = self.right.eval(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        # power: numpy handles negative bases only for integer exponents,
        # fractional powers of negative numbers must surface as domain errors
        with np.errstate(all="ignore"):
            return np.float_power(a, b) if _needs_float_power(a, b) else a ** b

    def diff(self):
        a, b, da, db = self.left, self.right, self.left.diff(), self.right.diff()
        if self.op == "+":
            return _Bin("+", da, db)
        if self.op == "-":
            return _Bin("-", da, db)
        if self.op == "*":
            return _Bin("+", _Bin("*", da, b), _Bin("*", a, db))
        if self.op == "/":
            num = _Bin("-", _Bin("*", da, b), _Bin("*", a, db))
            return _Bin("/", num, _Bin("*", b, b))
        # d(a^b): a^b * (db*log(a) + b*da/a); constant exponent simplifies
        if isinstance(b, _Num):
            c = b.value
            return _Bin(
                "*",
                _Bin("*", _Num(c), _Bin("^", a, _Num(c - 1.0))),
                da,
            )
        outer = _Bin(
            "+",
            _Bin("*", db, _Call("log", (a,))),
            _Bin("/", _Bin("*", b, da), a),
        )
        return _Bin("*", self, outer)

    def text(self):
        return f"({self.left.text()} {self.op} {self.right.text()})"


def _needs_float_power(a, b) -> bool:
    # float_power keeps negative-base fractional powers as nan instead of
    # raising; we want the nan so the finite-check can localize it
    return isinstance(a, np.ndarray) or isinstance(b, np.ndarray)


@dataclass(frozen=True)
class _Neg(_Node):
    arg: _Node

    def eval(self, x):
        return -self.arg.eval(x)

    def diff(self):
        return _Neg(self.arg.diff())

    def text(self):
        return f"(-{self.arg.text()})"


@dataclass(frozen=True)
class _Call(_Node):
    fn: str
    args: tuple

    def eval(self, x):
        vals = [a.eval(x) for a in self.args]
        with np.errstate(all="ignore"):
            if self.fn == "sqrt":
                return np.sqrt(vals[0])
            if self.fn == "exp":
                return np.exp(vals[0])
            if self.fn == "log":
                return np.log(vals[0])
            if self.fn == "sin":
                return np.sin(vals[0])
            if self.fn == "cos":
                return np.cos(vals[0])
            if self.fn == "abs":
                return np.abs(vals[0])
            if self.fn == "sign":
                return np.sign(vals[0])
            if self.fn == "pow":
                return np.float_power(vals[0], vals[1])
        raise AssertionError(self.fn)

    def diff(self):
        a = self.args[0]
        da = a.diff()
        if self.fn == "sqrt":
            return _Bin("/", da, _Bin("*", _Num(2.0), self))
        if self.fn == "exp":
            return _Bin("*", self, da)
        if self.fn == "log":
            return _Bin("/", da, a)
        if self.fn == "sin":
            return _Bin("*", _Call("cos", (a,)), da)
        if self.fn == "cos":
            return _Neg(_Bin("*", _Call("sin", (a,)), da))
        if self.fn == "abs":
            # derivative almost everywhere; the kink at 0 is accepted
            return _Bin("*", _Call("sign", (a,)), da)
        if self.fn == "sign":
            return _Num(0.0)
        if self.fn == "pow":
            return _Bin("^", self.args[0], self.args[1]).diff()
        raise AssertionError(self.fn)

    def text(self):
        inner = ", ".join(a.text() for a in self.args)
        return f"{self.fn}({inner})"


# ---------------------------------------------------------------------------
# parser (recursive descent, ^ right-associative and binding tighter
# than unary minus on its left operand, matching usual convention)


class _Parser:
    def __init__(self, tokens: list[_Token], var: str):
        self.tokens = tokens
        self.k = 0
        self.var = var

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def take(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.take()
        if tok.kind != kind:
            raise ExprSyntaxError(f"expected {what}", tok.pos)
        return tok

    def parse(self) -> _Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> _Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = _Bin(op, node, self.term())
        return node

    def term(self) -> _Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = _Bin(op, node, self.unary())
        return node

    def unary(self) -> _Node:
        tok = self.peek()
        if tok.kind == "op" and tok.text in "+-":
            self.take()
            arg = self.unary()
            return arg if tok.text == "+" else _Neg(arg)
        return self.power()

    def power(self) -> _Node:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.take()
            return _Bin("^", base, self.unary())
        return base

    def atom(self) -> _Node:
        tok = self.take()
        if tok.kind == "num":
            try:
                return _Num(float(tok.text))
            except ValueError:
                raise ExprSyntaxError(f"bad numeric literal {tok.text!r}", tok.pos)
        if tok.kind == "lparen":
            node = self.expr()
            self.expect("rparen", "closing parenthesis")
            return node
        if tok.kind == "name":
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in _FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {name!r}", tok.pos)
                self.take()
                args = [self.expr()]
                while self.peek().kind == "comma":
                    self.take()
                    args.append(self.expr())
                self.expect("rparen", "closing parenthesis")
                arity = 2 if name == "pow" else 1
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{name} takes {arity} argument(s), got {len(args)}", tok.pos
                    )
                return _Call(name, tuple(args))
            if name in _CONSTANTS:
                return _Num(_CONSTANTS[name])
            if name == self.var:
                return _Var(name)
            raise ExprSyntaxError(f"unknown identifier {name!r}", tok.pos)
        raise ExprSyntaxError("expected a value", tok.pos)


# ---------------------------------------------------------------------------
# public wrapper


@dataclass
class RealFunction:
    """A real-valued function of one real variable with declared metadata.

    Evaluation either returns finite values or raises EvalDomainError;
    silent nan/inf never escape.  ``positivity`` and ``parity`` are
    caller declarations, verified only by explicit spot checks.
    ``support``, when set, promises the function vanishes outside the
    closed interval and lets integration clip windows.
    """

    fn: Callable
    expr_text: str = ""
    positivity: str = "unknown"
    parity: str = "none"
    support: Optional[tuple[float, float]] = None
    kinks: tuple = ()
    _ast: Optional[_Node] = field(default=None, repr=False)
    _derivative_of: Optional["RealFunction"] = field(default=None, repr=False)

    def __post_init__(self):
        if self.positivity not in _POSITIVITY:
            raise ValueError(f"positivity must be one of {_POSITIVITY}")
        if self.parity not in _PARITY:
            raise ValueError(f"parity must be one of {_PARITY}")

    def __call__(self, x: Union[float, np.ndarray]):
        scalar = np.isscalar(x) or (isinstance(x, np.ndarray) and x.ndim == 0)
        arr = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = self.fn(arr)
        out = np.asarray(out, dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        bad = ~np.isfinite(out)
        if bad.any():
            where = float(arr.reshape(-1)[np.argmax(bad.reshape(-1))])
            raise EvalDomainError(
                f"{self.describe()} evaluated to a non-finite value", where
            )
        if scalar:
            return float(out)
        return out

    def describe(self) -> str:
        return self.expr_text if self.expr_text else "<callable>"

    def derivative(self) -> "RealFunction":
        """Symbolic derivative for parsed expressions, else central differences."""
        if self._ast is not None:
            dast = self._ast.diff()
            return RealFunction(
                fn=dast.eval,
                expr_text=dast.text(),
                positivity="unknown",
                parity="none",
                support=self.support,
                _ast=dast,
            )
        base = self

        def fd(x):
            h = np.maximum(1e-5, 1e-5 * np.abs(x))
            return (base.fn(x + h) - base.fn(x - h)) / (2.0 * h)

        return RealFunction(
            fn=fd,
            expr_text=f"centraldiff({self.describe()})",
            support=self.support,
            _derivative_of=self,
        )

    def check_parity(self, probes, tol: float = 1e-9) -> bool:
        """Spot-check the declared parity at the given abscissae."""
        if self.parity == "none":
            return True
        xs = np.asarray(probes, dtype=float)
        left = self(xs)
        right = self(-xs)
        ref = 1.0 + np.abs(np.asarray(left))
        if self.parity == "even":
            return bool(np.all(np.abs(left - right) <= tol * ref))
        return bool(np.all(np.abs(left + right) <= tol * ref))

    def check_positivity(self, probes, tol: float = 0.0) -> bool:
        """Spot-check the declared sign at the given abscissae."""
        if self.positivity == "unknown":
            return True
        vals = np.asarray(self(np.asarray(probes, dtype=float)))
        if self.positivity == "strictly-positive":
            return bool(np.all(vals > tol))
        return bool(np.all(vals >= -abs(tol)))


def parse_function(
    text: str,
    var: str = "x",
    positivity: str = "unknown",
    parity: str = "none",
) -> RealFunction:
    """Parse expression text into a RealFunction.

    Raises ExprSyntaxError with a character position on malformed input
    or unknown identifiers.
    """
    ast = _Parser(_tokenize(text), var).parse()
    return RealFunction(
        fn=ast.eval,
        expr_text=ast.text(),
        positivity=positivity,
        parity=parity,
        _ast=ast,
    )


def from_callable(
    fn: Callable,
    label: str,
    positivity: str = "unknown",
    parity: str = "none",
    support: Optional[tuple[float, float]] = None,
    kinks: tuple = (),
) -> RealFunction:
    """Wrap a vectorized numpy callable as a RealFunction.

    ``kinks`` lists abscissae where the function is continuous but not
    smooth; window integrations split panels there.
    """
    return RealFunction(
        fn=fn,
        expr_text=label,
        positivity=positivity,
        parity=parity,
        support=support,
        kinks=tuple(float(k) for k in kinks),
    )
