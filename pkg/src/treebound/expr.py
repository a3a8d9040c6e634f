"""Analytic expression trees: parsing, evaluation, symbolic differentiation.

The AST is deliberately small: constants, variables ``x0 .. x{n-1}``,
arithmetic (``+ - * /``, unary ``-``), integer powers, and the functions
sin, cos, exp, log, sqrt, abs, max, min.  Nodes are immutable after
construction, so trees can be shared freely across threads; every
transformation returns new nodes.

Derivative trees may additionally contain an internal ``step`` node
(Heaviside, ``step(t) = 1`` for ``t >= 0``, else 0).  It encodes the
one-sided conventions at non-smooth points: ``d|u|/du = 0`` at ``u = 0``
and ``max(a, b)`` differentiates along its first argument on ties.
``step`` is not part of the input grammar and the parser rejects it.

Point evaluation follows IEEE doubles and never raises on finite input:
division by zero, log of a non-positive value and sqrt of a negative
value all produce NaN.  ``compile_function`` turns a tree into a plain
Python function (with common-subexpression elimination) that is an
order of magnitude faster than the tree walk and falls back to it
whenever a domain error occurs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expression",
    "ExpressionError",
    "ParseError",
    "DimensionMismatch",
    "GradientVector",
    "HessianDiagonal",
    "ReluNetWeights",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "pow_int",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "absolute",
    "maximum",
    "minimum",
    "balanced_sum",
    "with_dims",
    "parse",
    "unparse",
    "structurally_equal",
    "evaluate",
    "differentiate",
    "gradient",
    "hessian_diagonal",
    "relu_net_to_expression",
    "compile_function",
    "compile_vector",
    "CompiledObjective",
    "as_objective",
]

_NAN = float("nan")
_INF = math.inf

_UNARY = frozenset({"neg", "sin", "cos", "exp", "log", "sqrt", "abs", "step"})
_BINARY = frozenset({"add", "sub", "mul", "div", "max", "min"})
# functions accepted by the parser, with their arity
_FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
              "max": 2, "min": 2}
_KINKS = frozenset({"abs", "max", "min"})


class ExpressionError(ValueError):
    """Base class for expression construction and usage errors."""


class ParseError(ExpressionError):
    """Syntax or semantic error in an expression source string."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DimensionMismatch(ExpressionError):
    """An argument vector does not match the expression's dimension."""


class Expression:
    """One immutable node of an expression tree.

    ``kind`` names the operation; ``args`` holds the child expressions;
    ``payload`` carries the constant value, the variable index, or the
    integer power exponent.  ``dims`` is the number of input dimensions
    the expression is declared over (at least ``max var index + 1``).
    """

    __slots__ = ("kind", "args", "payload", "dims")

    def __init__(self, kind, args=(), payload=None, dims=None):
        self.kind = kind
        self.args = tuple(args)
        if dims is None:
            dims = max((a.dims for a in self.args), default=0)
            if kind == "var":
                dims = payload + 1
        self.payload = payload
        self.dims = dims

    def __reduce__(self):
        return (Expression, (self.kind, self.args, self.payload, self.dims))

    def with_dims(self, n):
        return with_dims(self, n)

    # arithmetic sugar so benchmark builders read naturally
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

    def __pow__(self, k):
        return pow_int(self, k)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Expression({unparse(self)!r}, dims={self.dims})"


def _coerce(value):
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)):
        return const(value)
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


# ---------------------------------------------------------------------------
# constructors with constant folding

def const(value):
    return Expression("const", payload=float(value))


def var(index):
    index = int(index)
    if index < 0:
        raise ExpressionError("variable index must be >= 0")
    return Expression("var", payload=index)


def _const_value(e):
    return e.payload if e.kind == "const" else None


def add(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.payload + b.payload)
    if _const_value(a) == 0.0:
        return b
    if _const_value(b) == 0.0:
        return a
    return Expression("add", (a, b))


def sub(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.payload - b.payload)
    if _const_value(b) == 0.0:
        return a
    if _const_value(a) == 0.0:
        return neg(b)
    return Expression("sub", (a, b))


def mul(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(a.payload * b.payload)
    # zero/one folds are what keep derivative trees small
    if _const_value(a) == 0.0 or _const_value(b) == 0.0:
        return const(0.0)
    if _const_value(a) == 1.0:
        return b
    if _const_value(b) == 1.0:
        return a
    if _const_value(a) == -1.0:
        return neg(b)
    if _const_value(b) == -1.0:
        return neg(a)
    return Expression("mul", (a, b))


def div(a, b):
    if a.kind == "const" and b.kind == "const" and b.payload != 0.0:
        return const(a.payload / b.payload)
    if _const_value(a) == 0.0:
        return const(0.0)
    if _const_value(b) == 1.0:
        return a
    if _const_value(b) == -1.0:
        return neg(a)
    return Expression("div", (a, b))


def neg(a):
    if a.kind == "const":
        return const(-a.payload)
    if a.kind == "neg":
        return a.args[0]
    return Expression("neg", (a,))


def pow_int(base, k):
    if isinstance(k, bool) or not isinstance(k, int):
        raise ExpressionError("power exponent must be an integer")
    if k == 0:
        return const(1.0)
    if k == 1:
        return base
    if base.kind == "const":
        try:
            return const(base.payload ** k)
        except (OverflowError, ZeroDivisionError):
            pass
    return Expression("pow", (base,), payload=k)


def _fold_unary(kind, a, fn):
    if a.kind == "const":
        v = fn(a.payload)
        if math.isfinite(v):
            return const(v)
    return Expression(kind, (a,))


def sin(a):
    return _fold_unary("sin", a, _ref_sin)


def cos(a):
    return _fold_unary("cos", a, _ref_cos)


def exp(a):
    return _fold_unary("exp", a, _ref_exp)


def log(a):
    return _fold_unary("log", a, _ref_log)


def sqrt(a):
    return _fold_unary("sqrt", a, _ref_sqrt)


def absolute(a):
    return _fold_unary("abs", a, abs)


def _step(a):
    return _fold_unary("step", a, _ref_step)


def maximum(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(_fmax(a.payload, b.payload))
    return Expression("max", (a, b))


def minimum(a, b):
    if a.kind == "const" and b.kind == "const":
        return const(_fmin(a.payload, b.payload))
    return Expression("min", (a, b))


def balanced_sum(terms):
    """Sum a sequence of expressions with a balanced tree (shallow depth)."""
    terms = list(terms)
    if not terms:
        return const(0.0)
    while len(terms) > 1:
        terms = [add(terms[i], terms[i + 1]) if i + 1 < len(terms) else terms[i]
                 for i in range(0, len(terms), 2)]
    return terms[0]


def with_dims(e, n):
    n = int(n)
    if n < e.dims:
        raise DimensionMismatch(
            f"expression uses {e.dims} dimension(s), cannot narrow to {n}")
    if n == e.dims:
        return e
    return Expression(e.kind, e.args, e.payload, dims=n)


# ---------------------------------------------------------------------------
# traversal

def _postorder(root):
    """Every distinct node (by identity) after all of its children.

    Iterative so that long operator chains do not hit the recursion limit.
    """
    out = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if ready:
            out.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in node.args:
            if id(child) not in seen:
                stack.append((child, False))
    return out


def structurally_equal(a, b):
    """Structural comparison ignoring the declared dimension count."""
    stack = [(a, b)]
    while stack:
        u, v = stack.pop()
        if u is v:
            continue
        if u.kind != v.kind or u.payload != v.payload or len(u.args) != len(v.args):
            return False
        stack.extend(zip(u.args, v.args))
    return True


def _has_kinks(root):
    return any(n.kind in _KINKS for n in _postorder(root))


# ---------------------------------------------------------------------------
# reference point evaluation (defines the NaN semantics)

def _ref_div(a, b):
    if b == 0.0:
        return _NAN
    return a / b


def _ref_pow(a, k):
    try:
        return a ** k
    except OverflowError:
        return -_INF if (a < 0.0 and k % 2) else _INF
    except ZeroDivisionError:
        return _NAN


def _ref_sin(a):
    try:
        return math.sin(a)
    except ValueError:
        return _NAN


def _ref_cos(a):
    try:
        return math.cos(a)
    except ValueError:
        return _NAN


def _ref_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


def _ref_log(a):
    if a > 0.0:
        return math.log(a)
    return _NAN


def _ref_sqrt(a):
    if a >= 0.0:
        return math.sqrt(a)
    return _NAN


def _fmax(a, b):
    if a != a or b != b:
        return _NAN
    return a if a >= b else b


def _fmin(a, b):
    if a != a or b != b:
        return _NAN
    return a if a <= b else b


def _ref_step(a):
    if a != a:
        return _NAN
    return 1.0 if a >= 0.0 else 0.0


def evaluate(f, x):
    """Evaluate ``f`` at the point ``x`` (len(x) must equal f.dims)."""
    xs = [float(v) for v in x]
    if len(xs) != f.dims:
        raise DimensionMismatch(
            f"expression over {f.dims} dimension(s) evaluated at a "
            f"{len(xs)}-vector")
    vals = {}
    for node in _postorder(f):
        k = node.kind
        if k == "const":
            v = node.payload
        elif k == "var":
            v = xs[node.payload]
        else:
            a = vals[id(node.args[0])]
            if k == "add":
                v = a + vals[id(node.args[1])]
            elif k == "sub":
                v = a - vals[id(node.args[1])]
            elif k == "mul":
                v = a * vals[id(node.args[1])]
            elif k == "div":
                v = _ref_div(a, vals[id(node.args[1])])
            elif k == "neg":
                v = -a
            elif k == "pow":
                v = _ref_pow(a, node.payload)
            elif k == "sin":
                v = _ref_sin(a)
            elif k == "cos":
                v = _ref_cos(a)
            elif k == "exp":
                v = _ref_exp(a)
            elif k == "log":
                v = _ref_log(a)
            elif k == "sqrt":
                v = _ref_sqrt(a)
            elif k == "abs":
                v = abs(a)
            elif k == "max":
                v = _fmax(a, vals[id(node.args[1])])
            elif k == "min":
                v = _fmin(a, vals[id(node.args[1])])
            elif k == "step":
                v = _ref_step(a)
            else:
                raise ExpressionError(f"unknown node kind {k!r}")
        vals[id(node)] = v
    return float(vals[id(f)])


# ---------------------------------------------------------------------------
# symbolic differentiation

def differentiate(f, d):
    """Partial derivative of ``f`` with respect to variable ``d``.

    Non-smooth nodes use the fixed one-sided convention documented in
    the module docstring; the result is exact wherever ``f`` is smooth.
    """
    memo = {}
    for node in _postorder(f):
        k = node.kind
        if k == "const":
            r = const(0.0)
        elif k == "var":
            r = const(1.0 if node.payload == d else 0.0)
        elif k == "step":
            r = const(0.0)
        else:
            u = node.args[0]
            du = memo[id(u)]
            if k == "add":
                r = add(du, memo[id(node.args[1])])
            elif k == "sub":
                r = sub(du, memo[id(node.args[1])])
            elif k == "mul":
                v = node.args[1]
                r = add(mul(du, v), mul(u, memo[id(v)]))
            elif k == "div":
                v = node.args[1]
                dv = memo[id(v)]
                r = div(sub(mul(du, v), mul(u, dv)), pow_int(v, 2))
            elif k == "neg":
                r = neg(du)
            elif k == "pow":
                kk = node.payload
                r = mul(mul(const(float(kk)), pow_int(u, kk - 1)), du)
            elif k == "sin":
                r = mul(cos(u), du)
            elif k == "cos":
                r = neg(mul(sin(u), du))
            elif k == "exp":
                r = mul(exp(u), du)
            elif k == "log":
                r = div(du, u)
            elif k == "sqrt":
                r = div(du, mul(const(2.0), sqrt(u)))
            elif k == "abs":
                # sign(u) with sign(0) = 0
                r = mul(sub(_step(u), _step(neg(u))), du)
            elif k == "max":
                v = node.args[1]
                sel = _step(sub(u, v))  # 1 on the first-argument branch
                r = add(mul(sel, du), mul(sub(const(1.0), sel), memo[id(v)]))
            elif k == "min":
                v = node.args[1]
                sel = _step(sub(v, u))
                r = add(mul(sel, du), mul(sub(const(1.0), sel), memo[id(v)]))
            else:
                raise ExpressionError(f"unknown node kind {k!r}")
        memo[id(node)] = r
    return with_dims(memo[id(f)], f.dims)


@dataclass(frozen=True)
class GradientVector:
    """Per-dimension derivative expressions of a scalar expression."""

    components: tuple
    subgradient_convention: bool  # True when abs/max/min kinks were resolved

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]


@dataclass(frozen=True)
class HessianDiagonal:
    """Per-dimension second derivative expressions (d-th is d²f/dx_d²)."""

    components: tuple
    subgradient_convention: bool

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i):
        return self.components[i]


def gradient(f):
    comps = tuple(differentiate(f, d) for d in range(f.dims))
    return GradientVector(comps, _has_kinks(f))


def hessian_diagonal(f):
    comps = tuple(differentiate(differentiate(f, d), d) for d in range(f.dims))
    return HessianDiagonal(comps, _has_kinks(f))


# ---------------------------------------------------------------------------
# ReLU network translation

@dataclass(eq=False)
class ReluNetWeights:
    """One-hidden-layer ReLU network: y = b2 + w2 · relu(W1 x + b1)."""

    n: int
    h: int
    w1: np.ndarray  # h x n
    b1: np.ndarray  # h
    w2: np.ndarray  # h
    b2: float

    def __post_init__(self):
        self.n = int(self.n)
        self.h = int(self.h)
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = float(self.b2)
        if self.n < 1 or self.h < 1:
            raise ValueError("network needs n >= 1 inputs and h >= 1 hidden units")
        if self.w1.shape != (self.h, self.n):
            raise ValueError(f"w1 must be {self.h}x{self.n}, got {self.w1.shape}")
        if self.b1.shape != (self.h,):
            raise ValueError(f"b1 must have length {self.h}")
        if self.w2.shape != (self.h,):
            raise ValueError(f"w2 must have length {self.h}")
        for name, arr in (("w1", self.w1), ("b1", self.b1), ("w2", self.w2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if not math.isfinite(self.b2):
            raise ValueError("b2 is not finite")

    def forward(self, x):
        """Scalar forward pass accumulating in the same order as the
        translated expression, so the two agree bit for bit."""
        xs = [float(v) for v in x]
        if len(xs) != self.n:
            raise DimensionMismatch(f"expected {self.n} inputs, got {len(xs)}")
        acc = self.b2
        for j in range(self.h):
            lin = float(self.w1[j, 0]) * xs[0]
            for i in range(1, self.n):
                lin = lin + float(self.w1[j, i]) * xs[i]
            lin = lin + float(self.b1[j])
            acc = acc + float(self.w2[j]) * (lin if lin >= 0.0 else 0.0)
        return acc


def relu_net_to_expression(weights):
    """Translate the network into ``b2 + Σ_j w2_j · max(0, W1_j·x + b1_j)``."""
    w = weights
    total = const(w.b2)
    for j in range(w.h):
        lin = mul(const(float(w.w1[j, 0])), var(0))
        for i in range(1, w.n):
            lin = add(lin, mul(const(float(w.w1[j, i])), var(i)))
        lin = add(lin, const(float(w.b1[j])))
        total = add(total, mul(const(float(w.w2[j])), maximum(const(0.0), lin)))
    return with_dims(total, w.n)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


def _tokenize(text):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch == "\n":
            line += 1
            col = 1
            pos += 1
            continue
        if ch in " \t\r":
            pos += 1
            col += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        tokens.append((kind, tok, line, col))
        col += len(tok)
        pos = m.end()
    tokens.append(("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens, dims):
        self.tokens = tokens
        self.i = 0
        self.dims = dims

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], tok[3])

    def expect_op(self, op):
        kind, text, line, col = self.peek()
        if kind != "op" or text != op:
            self.error(f"expected {op!r}")
        return self.advance()

    def expression(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.advance()
                sign = -1
            kind, text, line, col = self.peek()
            if kind != "num" or not text.isdigit():
                self.error("power exponent must be an integer")
            self.advance()
            return pow_int(base, sign * int(text))
        return base

    def atom(self):
        kind, text, line, col = self.peek()
        if kind == "num":
            self.advance()
            return const(float(text))
        if kind == "name":
            self.advance()
            m = re.fullmatch(r"x(\d+)", text)
            if m:
                idx = int(m.group(1))
                if idx >= self.dims:
                    raise ParseError(
                        f"variable x{idx} out of range for {self.dims} "
                        f"dimension(s)", line, col)
                return var(idx)
            if text in _FUNCTIONS:
                self.expect_op("(")
                args = [self.expression()]
                if self.peek()[:2] == ("op", ","):
                    self.advance()
                    args.append(self.expression())
                self.expect_op(")")
                want = _FUNCTIONS[text]
                if len(args) != want:
                    raise ParseError(
                        f"{text} expects {want} argument(s), got {len(args)}",
                        line, col)
                builder = {"sin": sin, "cos": cos, "exp": exp, "log": log,
                           "sqrt": sqrt, "abs": absolute,
                           "max": maximum, "min": minimum}[text]
                return builder(*args)
            raise ParseError(f"unknown function {text!r}", line, col)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expression()
            self.expect_op(")")
            return node
        self.error("expected a number, variable, function or '('")


def parse(text, dims):
    """Parse an expression over variables ``x0 .. x{dims-1}``."""
    dims = int(dims)
    if dims < 1:
        raise ExpressionError("dims must be >= 1")
    parser = _Parser(_tokenize(text), dims)
    node = parser.expression()
    if parser.peek()[0] != "end":
        parser.error("unexpected trailing input")
    return with_dims(node, dims)


# ---------------------------------------------------------------------------
# unparsing

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_OPSYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def unparse(f):
    """Render a parseable source string (derivative trees may contain
    ``step(...)``, which the grammar does not accept back)."""
    parts = {}
    prec = {}
    for node in _postorder(f):
        k = node.kind
        if k == "const":
            s = repr(node.payload)
            p = 5 if node.payload >= 0 else 0
        elif k == "var":
            s = f"x{node.payload}"
            p = 5
        elif k in ("add", "sub", "mul", "div"):
            a, b = node.args
            my = _PREC[k]
            left = parts[id(a)] if prec[id(a)] >= my else f"({parts[id(a)]})"
            right = parts[id(b)] if prec[id(b)] > my else f"({parts[id(b)]})"
            s = f"{left} {_OPSYM[k]} {right}"
            p = my
        elif k == "neg":
            a = node.args[0]
            inner = parts[id(a)] if prec[id(a)] >= 3 else f"({parts[id(a)]})"
            s = f"-{inner}"
            p = 3
        elif k == "pow":
            a = node.args[0]
            base = parts[id(a)] if prec[id(a)] >= 5 else f"({parts[id(a)]})"
            s = f"{base}^{node.payload}"
            p = 4
        else:  # function application
            s = f"{k}({', '.join(parts[id(a)] for a in node.args)})"
            p = 5
        parts[id(node)] = s
        prec[id(node)] = p
    return parts[id(f)]


# ---------------------------------------------------------------------------
# compilation to plain Python functions

_COMPILE_NS = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log,
    "sqrt": math.sqrt, "_fmax": _fmax, "_fmin": _fmin, "_step": _ref_step,
    "inf": _INF, "nan": _NAN,
}


def _codegen(roots, name):
    """Generate one function evaluating all roots with shared CSE."""
    order = []
    seen = set()
    for r in roots:
        for node in _postorder(r):
            if id(node) not in seen:
                seen.add(id(node))
                order.append(node)
    names = {}
    cse = {}
    lines = []
    used_vars = sorted({n.payload for n in order if n.kind == "var"})
    for i in used_vars:
        lines.append(f"    v{i} = float(x[{i}])")
    for node in order:
        k = node.kind
        if k == "const":
            names[id(node)] = repr(node.payload)
            continue
        if k == "var":
            names[id(node)] = f"v{node.payload}"
            continue
        arg_names = tuple(names[id(a)] for a in node.args)
        key = (k, node.payload, arg_names)
        hit = cse.get(key)
        if hit is not None:
            names[id(node)] = hit
            continue
        a = arg_names[0]
        if k == "add":
            code = f"{a} + {arg_names[1]}"
        elif k == "sub":
            code = f"{a} - ({arg_names[1]})"
        elif k == "mul":
            code = f"{a} * {arg_names[1]}"
        elif k == "div":
            code = f"{a} / ({arg_names[1]})"
        elif k == "neg":
            code = f"-({a})"
        elif k == "pow":
            # parenthesized base: unary minus binds looser than **
            code = (f"{a} * {a}" if node.payload == 2
                    else f"({a}) ** {node.payload}")
        elif k == "abs":
            code = f"abs({a})"
        elif k == "max":
            code = f"_fmax({a}, {arg_names[1]})"
        elif k == "min":
            code = f"_fmin({a}, {arg_names[1]})"
        elif k == "step":
            code = f"_step({a})"
        else:
            code = f"{k}({a})"
        temp = f"t{len(cse)}"
        lines.append(f"    {temp} = {code}")
        cse[key] = temp
        names[id(node)] = temp
    if len(roots) == 1:
        ret = names[id(roots[0])]
    else:
        ret = "(" + ", ".join(names[id(r)] for r in roots) + ")"
    src = f"def {name}(x):\n" + "\n".join(lines) + f"\n    return {ret}\n"
    ns = dict(_COMPILE_NS)
    exec(compile(src, f"<compiled {name}>", "exec"), ns)
    return ns[name]


def compile_function(f):
    """Fast callable for ``f``; falls back to the reference tree walk on
    domain errors so NaN semantics are preserved exactly."""
    fast = _codegen([f], "_f")
    dims = f.dims

    def fn(x):
        if len(x) != dims:
            raise DimensionMismatch(
                f"expression over {dims} dimension(s) evaluated at a "
                f"{len(x)}-vector")
        try:
            return fast(x)
        except (ValueError, OverflowError, ZeroDivisionError):
            return evaluate(f, x)

    return fn


def compile_vector(components, dims):
    """Fast callable returning a tuple of component values."""
    components = tuple(components)
    if not components:
        return lambda x: ()
    fast = _codegen(list(components), "_v")
    single = len(components) == 1

    def fn(x):
        if len(x) != dims:
            raise DimensionMismatch(
                f"expression over {dims} dimension(s) evaluated at a "
                f"{len(x)}-vector")
        try:
            out = fast(x)
            return (out,) if single else out
        except (ValueError, OverflowError, ZeroDivisionError):
            return tuple(evaluate(c, x) for c in components)

    return fn


class CompiledObjective:
    """Value / gradient / Hessian-diagonal callables with evaluation counters.

    Each call to :meth:`value`, :meth:`gradient` or :meth:`hessian_diagonal`
    counts as one evaluation toward ``total_evaluations``, which is the
    accounting the search budgets use.
    """

    def __init__(self, expression):
        self.expression = expression
        self.dims = expression.dims
        self._value = compile_function(expression)
        self._grad = None
        self._hess = None
        self.value_evals = 0
        self.gradient_evals = 0
        self.hessian_evals = 0
        self.sample_log = None  # optional list capturing points passed to value()

    @property
    def total_evaluations(self):
        return self.value_evals + self.gradient_evals + self.hessian_evals

    def value(self, x):
        self.value_evals += 1
        if self.sample_log is not None:
            self.sample_log.append(np.array(x, dtype=float))
        return self._value(x)

    def gradient(self, x):
        if self._grad is None:
            self._grad = compile_vector(gradient(self.expression).components,
                                        self.dims)
        self.gradient_evals += 1
        return np.array(self._grad(x), dtype=float)

    def hessian_diagonal(self, x):
        if self._hess is None:
            self._hess = compile_vector(
                hessian_diagonal(self.expression).components, self.dims)
        self.hessian_evals += 1
        return np.array(self._hess(x), dtype=float)


def as_objective(f):
    if isinstance(f, CompiledObjective):
        return f
    if isinstance(f, Expression):
        return CompiledObjective(f)
    raise TypeError("expected an Expression or CompiledObjective")
