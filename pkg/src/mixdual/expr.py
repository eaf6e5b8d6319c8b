"""Scalar integrand expressions in ``t, x<i>, xd<i>, xdd<i>``.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' integer)?
    atom   := number | 't' | 'x'i | 'xd'i | 'xdd'i
            | func '(' expr ')' | '(' expr ')' | '-' atom
    func   := 'sin' | 'cos' | 'exp' | 'sqrt'

Indices are 0-based; ``x[0]`` is accepted as a synonym of ``x0``. Unary minus
is an ``atom``, so ``-x0^2`` parses as ``(-x0)^2``; write ``-(x0^2)`` or
``0 - x0^2`` for the negated square.

Evaluation is vectorised over grid nodes. Derivatives with respect to
``(x, xd, xdd)`` are exact: every value is carried as a dual number whose
infinitesimal part is a gradient row of length ``3n``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalError, ExprSyntaxError, IndexOutOfRange, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "exp", "sqrt")
_STATE_KINDS = ("x", "xd", "xdd")

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\]]))"
)
_VAR = re.compile(r"(xdd|xd|x)(\d+)$")


# -- syntax tree -------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 't', 'x', 'xd' or 'xdd'
    index: int = 0


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


def _to_text(node) -> str:
    if isinstance(node, Num):
        s = repr(float(node.value))
        return s if node.value >= 0 else f"(0 - {repr(-float(node.value))})"
    if isinstance(node, Var):
        return "t" if node.kind == "t" else f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"-({_to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({_to_text(node.left)} {node.op} {_to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({_to_text(node.base)})^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({_to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def _walk(node):
    yield node
    if isinstance(node, (Neg, Call)):
        yield from _walk(node.arg)
    elif isinstance(node, Pow):
        yield from _walk(node.base)
    elif isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)


# -- parser ------------------------------------------------------------------


def _tokenize(text: str):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.advance()
        if val != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            kind, val, pos = self.advance()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be a non-negative integer literal", pos)
            node = Pow(node, int(val))
        return node

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "-":
            return Neg(self.atom())
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                node = self.expr()
                self.expect(")")
                return Call(val, node)
            if val == "t":
                return Var("t")
            if val in _STATE_KINDS and self.peek()[1] == "[":
                self.advance()
                ikind, ival, ipos = self.advance()
                if ikind != "num" or not ival.isdigit():
                    raise ExprSyntaxError("index must be a non-negative integer", ipos)
                self.expect("]")
                return self._var(val, int(ival), pos)
            m = _VAR.match(val)
            if m:
                return self._var(m.group(1), int(m.group(2)), pos)
            raise UnknownIdentifier(f"unknown identifier {val!r} at position {pos}")
        found = val or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", pos)

    def _var(self, kind, index, pos):
        if index >= self.n:
            raise IndexOutOfRange(
                f"{kind}{index} at position {pos} exceeds state dimension n={self.n}"
            )
        return Var(kind, index)


# -- dual-number evaluation --------------------------------------------------


class Dual:
    """Node-wise values with an exact gradient part.

    ``val`` has shape ``(N,)``; ``grad`` has shape ``(N, 3n)`` or is ``None``
    when the quantity does not depend on the state.
    """

    __slots__ = ("val", "grad")

    def __init__(self, val, grad=None):
        self.val = val
        self.grad = grad


def _add_grad(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _scale_grad(g, s):
    return None if g is None else g * s[:, None]


def _check_finite(v, what):
    if not np.all(np.isfinite(v)):
        raise EvalError(f"non-finite result in {what() if callable(what) else what}")


def _apply(node, env, with_grad: bool) -> Dual:
    if isinstance(node, Num):
        return Dual(np.full(env["N"], node.value))
    if isinstance(node, Var):
        if node.kind == "t":
            return Dual(env["t"])
        val = env[node.kind][:, node.index]
        grad = None
        if with_grad:
            n = env["n"]
            grad = np.zeros((env["N"], 3 * n))
            grad[:, _STATE_KINDS.index(node.kind) * n + node.index] = 1.0
        return Dual(val, grad)
    if isinstance(node, Neg):
        a = _apply(node.arg, env, with_grad)
        return Dual(-a.val, None if a.grad is None else -a.grad)
    if isinstance(node, BinOp):
        a = _apply(node.left, env, with_grad)
        b = _apply(node.right, env, with_grad)
        if node.op == "+":
            return Dual(a.val + b.val, _add_grad(a.grad, b.grad))
        if node.op == "-":
            return Dual(a.val - b.val, _add_grad(a.grad, None if b.grad is None else -b.grad))
        if node.op == "*":
            return Dual(
                a.val * b.val, _add_grad(_scale_grad(a.grad, b.val), _scale_grad(b.grad, a.val))
            )
        if np.any(b.val == 0.0):
            raise EvalError("division by zero")
        q = a.val / b.val
        grad = _add_grad(_scale_grad(a.grad, 1.0 / b.val), _scale_grad(b.grad, -q / b.val))
        _check_finite(q, "division")
        return Dual(q, grad)
    if isinstance(node, Pow):
        a = _apply(node.base, env, with_grad)
        k = node.exponent
        if k == 0:
            return Dual(np.ones(env["N"]))
        with np.errstate(over="ignore", invalid="ignore"):
            val = a.val**k
        _check_finite(val, "power")
        return Dual(val, _scale_grad(a.grad, k * a.val ** (k - 1)))
    if isinstance(node, Call):
        a = _apply(node.arg, env, with_grad)
        f = node.func
        if f == "sin":
            return Dual(np.sin(a.val), _scale_grad(a.grad, np.cos(a.val)))
        if f == "cos":
            return Dual(np.cos(a.val), _scale_grad(a.grad, -np.sin(a.val)))
        if f == "exp":
            with np.errstate(over="ignore"):
                val = np.exp(a.val)
            _check_finite(val, "exp")
            return Dual(val, _scale_grad(a.grad, val))
        if np.any(a.val < 0.0):
            raise EvalError("sqrt of a negative number")
        val = np.sqrt(a.val)
        if a.grad is None:
            return Dual(val)
        flat = val == 0.0
        if np.any(flat & np.any(a.grad != 0.0, axis=1)):
            raise EvalError("sqrt is not differentiable at 0")
        safe = np.where(flat, 1.0, val)
        return Dual(val, _scale_grad(a.grad, np.where(flat, 0.0, 0.5 / safe)))
    raise TypeError(f"not an expression node: {node!r}")


# -- public API --------------------------------------------------------------


@dataclass(frozen=True)
class EvalPoint:
    t: float
    x: np.ndarray
    xd: np.ndarray
    xdd: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.x, self.xd, self.xdd)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
            raise ValueError("x, xd and xdd must be vectors of the same length")
        if not (np.isfinite(self.t) and all(np.all(np.isfinite(a)) for a in arrs)):
            raise ValueError("evaluation point must be finite")
        for name, a in zip(_STATE_KINDS, arrs):
            object.__setattr__(self, name, a)

    @classmethod
    def at(cls, t=0.0, x=(), xd=None, xdd=None):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        zero = np.zeros_like(x)
        return cls(t, x, zero if xd is None else xd, zero if xdd is None else xdd)


@dataclass(frozen=True)
class Expr:
    root: object
    n: int

    def __str__(self) -> str:
        return _to_text(self.root)

    def uses(self, kind: str) -> bool:
        """True if a variable of ``kind`` ('t', 'x', 'xd', 'xdd') occurs."""
        return any(isinstance(nd, Var) and nd.kind == kind for nd in _walk(self.root))

    def _env(self, t, X, Xd, Xdd):
        X = np.asarray(X, dtype=float)
        N = X.shape[0]
        if X.shape[1] != self.n:
            raise IndexOutOfRange(f"expression declared for n={self.n}, got {X.shape[1]} states")
        t = np.broadcast_to(np.asarray(t, dtype=float), (N,))
        return {"t": t, "x": X, "xd": np.asarray(Xd, float), "xdd": np.asarray(Xdd, float),
                "N": N, "n": self.n}

    def values(self, t, X, Xd, Xdd) -> np.ndarray:
        """Evaluate at every row of the ``(N, n)`` state arrays."""
        with np.errstate(invalid="ignore"):
            out = _apply(self.root, self._env(t, X, Xd, Xdd), False).val
        _check_finite(out, self.__str__)
        return np.array(out, dtype=float)

    def values_and_partials(self, t, X, Xd, Xdd):
        """Values ``(N,)`` and partials ``(N, n)`` with respect to x, xd, xdd."""
        env = self._env(t, X, Xd, Xdd)
        with np.errstate(invalid="ignore"):
            d = _apply(self.root, env, True)
        _check_finite(d.val, self.__str__)
        N, n = env["N"], self.n
        grad = np.zeros((N, 3 * n)) if d.grad is None else d.grad
        _check_finite(grad, lambda: f"derivative of {self}")
        return (np.array(d.val, dtype=float), grad[:, :n].copy(),
                grad[:, n:2 * n].copy(), grad[:, 2 * n:].copy())


def parse(text: str, n: int) -> Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    if n < 1:
        raise ValueError("state dimension must be at least 1")
    return Expr(_Parser(text, n).parse(), n)


def _point_arrays(p: EvalPoint):
    return p.t, p.x[None, :], p.xd[None, :], p.xdd[None, :]


def evaluate(e: Expr, p: EvalPoint) -> float:
    return float(e.values(*_point_arrays(p))[0])


def partials(e: Expr, p: EvalPoint):
    """Exact ``(df/dx, df/dxd, df/dxdd)`` at a single point."""
    _, gx, gxd, gxdd = e.values_and_partials(*_point_arrays(p))
    return gx[0], gxd[0], gxdd[0]
