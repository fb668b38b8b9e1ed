"""A small expression language for time- and state-dependent matrices.

System data (the plant matrix, uncertainty, disturbance, gain schedules)
is written as strings like ``"t^(1/2)*sin(t)"`` or ``"t^(11/4)*cos(x1)"``,
parsed once into an immutable tree, and evaluated many times.  Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

``^`` is right associative and binds tighter than unary minus, so
``2^3^2 = 512`` and ``-2^2 = -4``.  Allowed variables are ``t`` and the
state components ``x1 .. xn`` (where permitted); ``pi`` is a constant.
Functions: sin, cos, tan, exp, log, sqrt, abs (one argument) and pow, min,
max (two arguments).

Parse failures raise :class:`SourceError` with a byte offset into the
source.  Domain failures during evaluation (``sqrt`` of a negative value,
``log`` of a non-positive value, division by zero, a negative base raised
to a fractional power, or any non-finite intermediate) raise
:class:`EvalError` pointing at the offending subexpression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "SourceError",
    "EvalError",
    "Expr",
    "Lit",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "FUNCTIONS",
    "parse",
    "parse_matrix",
    "parse_vector",
    "eval_expr",
    "eval_matrix",
    "format_expr",
    "collect_vars",
    "compile_expr",
    "MatrixFunction",
    "VectorFunction",
    "state_vars",
]

FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1, "abs": 1,
    "pow": 2, "min": 2, "max": 2,
}

_MAX_DEPTH = 200


class SourceError(ValueError):
    """A parse failure, carrying the byte offset into the source string."""

    def __init__(self, message: str, source: str = "", offset: int = 0):
        self.message = message
        self.source = source
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class EvalError(ValueError):
    """A numeric domain failure, carrying the offset of the subexpression."""

    def __init__(self, message: str, offset: int = -1):
        self.message = message
        self.offset = offset
        if offset >= 0:
            super().__init__(f"{message} at offset {offset}")
        else:
            super().__init__(message)


class Expr:
    """Base class for expression nodes.  Nodes are immutable; the source
    offset is excluded from equality so that structurally identical trees
    compare equal regardless of where they were parsed."""

    __hash__ = None


@dataclass(frozen=True, eq=True)
class Lit(Expr):
    value: float
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True, eq=True)
class Bin(Expr):
    op: str  # one of + - * / ^
    left: Expr
    right: Expr
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True, eq=True)
class Call(Expr):
    fn: str
    args: tuple
    pos: int = field(default=-1, compare=False)


def state_vars(n: int) -> tuple:
    """Variable names for an n-dimensional state: ('x1', ..., 'xn')."""
    return tuple(f"x{i + 1}" for i in range(n))


_NUM_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.i = 0
        self.tokens = []
        self._scan()

    def _byte_offset(self, i: int) -> int:
        return len(self.text[:i].encode("utf-8"))

    def _scan(self):
        text = self.text
        n = len(text)
        i = 0
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            m = _NUM_RE.match(text, i)
            if m:
                self.tokens.append(("num", m.group(), self._byte_offset(i)))
                i = m.end()
                continue
            m = _IDENT_RE.match(text, i)
            if m:
                self.tokens.append(("ident", m.group(), self._byte_offset(i)))
                i = m.end()
                continue
            if ch in "+-*/^(),":
                self.tokens.append(("op", ch, self._byte_offset(i)))
                i += 1
                continue
            raise SourceError(f"unexpected character {ch!r}", text,
                              self._byte_offset(i))
        self.tokens.append(("end", "", self._byte_offset(n)))


class _Parser:
    def __init__(self, text: str, allowed: frozenset):
        self.text = text
        self.allowed = allowed
        self.toks = _Tokenizer(text).tokens
        self.i = 0
        self.depth = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.peek()
        raise SourceError(message, self.text, tok[2])

    def expect_op(self, ch: str):
        kind, text, off = self.peek()
        if kind != "op" or text != ch:
            self.fail(f"expected {ch!r}")
        return self.next()

    def parse(self) -> Expr:
        kind, _, _ = self.peek()
        if kind == "end":
            self.fail("empty expression")
        e = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            self.fail(f"unexpected trailing input {text!r}")
        return e

    def expr(self) -> Expr:
        self.depth += 1
        if self.depth > _MAX_DEPTH:
            self.fail("expression too deeply nested")
        e = self.term()
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                e = Bin(text, e, self.term(), pos=e.pos)
            else:
                break
        self.depth -= 1
        return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, off = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                e = Bin(text, e, self.unary(), pos=e.pos)
            else:
                break
        return e

    def unary(self) -> Expr:
        kind, text, off = self.peek()
        if kind == "op" and text == "-":
            self.next()
            inner = self.unary()
            if isinstance(inner, Lit):
                # fold a negated literal so that "-2" is a single node
                return Lit(-inner.value, pos=off)
            return Neg(inner, pos=off)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, text, off = self.peek()
        if kind == "op" and text == "^":
            self.next()
            return Bin("^", base, self.unary(), pos=base.pos)
        return base

    def atom(self) -> Expr:
        kind, text, off = self.next()
        if kind == "num":
            return Lit(float(text), pos=off)
        if kind == "ident":
            if text == "pi":
                return Lit(math.pi, pos=off)
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise SourceError(f"unknown function {text!r}", self.text, off)
                self.next()
                args = [self.expr()]
                while True:
                    pkind, ptext, _ = self.peek()
                    if pkind == "op" and ptext == ",":
                        self.next()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                arity = FUNCTIONS[text]
                if len(args) != arity:
                    raise SourceError(
                        f"{text} takes {arity} argument{'s' if arity > 1 else ''}, "
                        f"got {len(args)}", self.text, off)
                return Call(text, tuple(args), pos=off)
            if text in FUNCTIONS:
                raise SourceError(
                    f"{text} is a function and needs arguments", self.text, off)
            if text not in self.allowed:
                raise SourceError(f"unknown identifier {text!r}", self.text, off)
            return Var(text, pos=off)
        if kind == "op" and text == "(":
            self.depth += 1
            if self.depth > _MAX_DEPTH:
                raise SourceError("expression too deeply nested", self.text, off)
            e = self.expr()
            self.expect_op(")")
            self.depth -= 1
            return e
        if kind == "end":
            raise SourceError("unexpected end of input", self.text, off)
        raise SourceError(f"unexpected {text!r}", self.text, off)


def parse(text: str, allowed_vars: Iterable[str] = ("t",)) -> Expr:
    """Parse ``text`` into an expression tree.

    ``allowed_vars`` lists the permitted variable names; anything else
    (apart from ``pi`` and the function names) is rejected with a
    SourceError pointing at the identifier.
    """
    if not isinstance(text, str):
        raise SourceError(f"expected an expression string, got {type(text).__name__}")
    return _Parser(text, frozenset(allowed_vars)).parse()


# ---------------------------------------------------------------------------
# evaluation

def _check_finite(v: float, what: str, pos: int) -> float:
    if not math.isfinite(v):
        raise EvalError(f"non-finite result in {what}", pos)
    return v


def _eval(e: Expr, env: dict) -> float:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        v = env.get(e.name)
        if v is None:
            raise EvalError(f"unbound variable {e.name!r}", e.pos)
        return v
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Bin):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        op = e.op
        if op == "+":
            return _check_finite(a + b, "addition", e.pos)
        if op == "-":
            return _check_finite(a - b, "subtraction", e.pos)
        if op == "*":
            return _check_finite(a * b, "multiplication", e.pos)
        if op == "/":
            if b == 0.0:
                raise EvalError("division by zero", e.pos)
            return _check_finite(a / b, "division", e.pos)
        return _pow(a, b, e.pos)
    if isinstance(e, Call):
        args = [_eval(a, env) for a in e.args]
        return _call(e.fn, args, e.pos)
    raise TypeError(f"not an expression node: {e!r}")


def _pow(a: float, b: float, pos: int) -> float:
    try:
        v = math.pow(a, b)
    except ValueError:
        raise EvalError(
            f"invalid power: base {a:g} with exponent {b:g}", pos) from None
    except OverflowError:
        raise EvalError("overflow in power", pos) from None
    return _check_finite(v, "power", pos)


def _call(fn: str, args: list, pos: int) -> float:
    try:
        if fn == "sin":
            v = math.sin(args[0])
        elif fn == "cos":
            v = math.cos(args[0])
        elif fn == "tan":
            v = math.tan(args[0])
        elif fn == "exp":
            v = math.exp(args[0])
        elif fn == "log":
            if args[0] <= 0.0:
                raise EvalError(f"log of non-positive value {args[0]:g}", pos)
            v = math.log(args[0])
        elif fn == "sqrt":
            if args[0] < 0.0:
                raise EvalError(f"sqrt of negative value {args[0]:g}", pos)
            v = math.sqrt(args[0])
        elif fn == "abs":
            v = abs(args[0])
        elif fn == "pow":
            return _pow(args[0], args[1], pos)
        elif fn == "min":
            v = min(args[0], args[1])
        elif fn == "max":
            v = max(args[0], args[1])
        else:
            raise TypeError(f"unknown function {fn!r}")
    except OverflowError:
        raise EvalError(f"overflow in {fn}", pos) from None
    except ValueError as exc:
        if isinstance(exc, EvalError):
            raise
        raise EvalError(f"domain error in {fn}", pos) from None
    return _check_finite(v, fn, pos)


def eval_expr(e: Expr, t: float | None = None, x: Sequence[float] | None = None) -> float:
    """Evaluate an expression at time ``t`` and state ``x``.

    State components bind to ``x1 .. xn``.  Unbound variables and numeric
    domain failures raise EvalError with the source offset.
    """
    env = {}
    if t is not None:
        env["t"] = float(t)
    if x is not None:
        for i, xi in enumerate(x):
            env[f"x{i + 1}"] = float(xi)
    return _eval(e, env)


def collect_vars(e: Expr) -> set:
    """The set of variable names appearing in ``e``."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, Bin):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.extend(node.args)
    return out


# ---------------------------------------------------------------------------
# formatting

_PREC_ADD = 1.0
_PREC_MUL = 2.0
_PREC_NEG = 2.5
_PREC_POW = 3.0
_PREC_ATOM = 9.0


def _fmt(e: Expr):
    """Return (text, precedence) so parents can decide on parentheses."""
    if isinstance(e, Lit):
        if e.value < 0 or (e.value == 0.0 and math.copysign(1.0, e.value) < 0):
            return "-" + repr(-e.value), _PREC_NEG
        return repr(e.value), _PREC_ATOM
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Neg):
        text, prec = _fmt(e.operand)
        if prec < _PREC_NEG:
            text = f"({text})"
        return "-" + text, _PREC_NEG
    if isinstance(e, Call):
        args = ", ".join(_fmt(a)[0] for a in e.args)
        return f"{e.fn}({args})", _PREC_ATOM
    if isinstance(e, Bin):
        if e.op in "+-":
            prec = _PREC_ADD
        elif e.op in "*/":
            prec = _PREC_MUL
        else:
            prec = _PREC_POW
        lt, lp = _fmt(e.left)
        rt, rp = _fmt(e.right)
        if e.op == "^":
            # right associative: parenthesize an equal-precedence left child
            if lp <= prec:
                lt = f"({lt})"
            if rp < prec:
                rt = f"({rt})"
        else:
            # left associative: parenthesize an equal-precedence right child
            if lp < prec:
                lt = f"({lt})"
            if rp <= prec:
                rt = f"({rt})"
        return f"{lt}{e.op}{rt}", prec
    raise TypeError(f"not an expression node: {e!r}")


def format_expr(e: Expr) -> str:
    """Render a tree back to source.  ``parse(format_expr(e))`` reproduces
    ``e`` exactly (offsets aside) and evaluates identically."""
    return _fmt(e)[0]


# ---------------------------------------------------------------------------
# compilation

def _gen(e: Expr) -> str:
    # fully parenthesized source; semantics match _eval except that the
    # domain checks are left to the caller's fallback path
    if isinstance(e, Lit):
        return f"({e.value!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_gen(e.operand)})"
    if isinstance(e, Bin):
        if e.op == "^":
            return f"pow({_gen(e.left)}, {_gen(e.right)})"
        return f"({_gen(e.left)}{e.op}{_gen(e.right)})"
    if isinstance(e, Call):
        args = ", ".join(_gen(a) for a in e.args)
        if e.fn in ("abs", "min", "max"):
            return f"{e.fn}({args})"
        return f"{e.fn}({args})"
    raise TypeError(f"not an expression node: {e!r}")


_GEN_GLOBALS = {
    "__builtins__": {},
    "pow": math.pow,
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt,
    "abs": abs, "min": min, "max": max,
}


def compile_expr(e: Expr, names: tuple = ("t",)) -> Callable[..., float]:
    """Compile an expression to a fast scalar function of ``names``.

    The compiled form produces bit-identical values to :func:`eval_expr`.
    On a domain failure or a non-finite result it re-runs the checked
    evaluator so the caller still gets a located EvalError.
    """
    src = f"lambda {', '.join(names)}: {_gen(e)}"
    raw = eval(src, dict(_GEN_GLOBALS))

    def fn(*args):
        try:
            v = raw(*args)
        except Exception:
            v = None
        if v is None or not math.isfinite(v):
            env = dict(zip(names, args))
            return _eval(e, env)
        return v

    return fn


class _Grid:
    """Shared machinery for expression-valued matrices and vectors."""

    def __init__(self, entries, allowed_vars):
        self.entries = entries
        self.allowed = frozenset(allowed_vars)
        for v in self.allowed:
            if v != "t" and not re.fullmatch(r"x\d+", v):
                raise SourceError(f"allowed variable {v!r} must be 't' or 'x<k>'")
        used = set()
        for e in self._flat():
            used |= collect_vars(e)
        bad = used - self.allowed
        if bad:
            raise SourceError(
                f"variable(s) {sorted(bad)} not allowed here; "
                f"allowed: {sorted(self.allowed)}")
        self.state_dependent = any(v != "t" for v in used)
        self._compiled = None

    def _flat(self):
        raise NotImplementedError

    def _names(self):
        if not self.state_dependent:
            return ("t",)
        ns = sorted((v for v in self.allowed if v != "t"),
                    key=lambda s: int(s[1:]))
        return ("t",) + tuple(ns)


class MatrixFunction(_Grid):
    """A square grid of expressions, evaluated to an n x n array.

    Entries may use ``t`` and, when constructed with state variables in
    ``allowed_vars``, the components ``x1 .. xn``.  Two instances compare
    equal when their expression trees do.
    """

    def __init__(self, entries, allowed_vars=("t",)):
        entries = tuple(tuple(row) for row in entries)
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise SourceError("matrix of expressions must be square")
        for row in entries:
            for e in row:
                if not isinstance(e, Expr):
                    raise SourceError(f"matrix entry {e!r} is not an expression")
        self.n = n
        super().__init__(entries, allowed_vars)

    def _flat(self):
        return [e for row in self.entries for e in row]

    def __call__(self, t: float, x=None) -> np.ndarray:
        return eval_matrix(self, t, x)

    def __eq__(self, other):
        return isinstance(other, MatrixFunction) and self.entries == other.entries

    __hash__ = None

    def formatted(self):
        """Entries rendered back to source strings (row major)."""
        return [[format_expr(e) for e in row] for row in self.entries]

    def compiled(self) -> Callable[..., np.ndarray]:
        """A fast evaluator ``f(t[, x]) -> ndarray``, bit-identical to
        :meth:`__call__` and falling back to it on domain failures."""
        if self._compiled is not None:
            return self._compiled
        names = self._names()
        rows = ", ".join(
            "[" + ", ".join(_gen(e) for e in row) + "]" for row in self.entries)
        g = dict(_GEN_GLOBALS)
        g["_array"] = np.array
        raw = eval(f"lambda {', '.join(names)}: _array([{rows}])", g)
        state = self.state_dependent

        def fn(t, x=None):
            try:
                out = raw(t, *x) if state else raw(t)
            except Exception:
                out = None
            if out is None or not np.isfinite(out).all():
                return eval_matrix(self, t, x)
            return out

        self._compiled = fn
        return fn


class VectorFunction(_Grid):
    """A column of expressions, evaluated to a length-n array."""

    def __init__(self, entries, allowed_vars=("t",)):
        entries = tuple(entries)
        if not entries:
            raise SourceError("vector of expressions must not be empty")
        for e in entries:
            if not isinstance(e, Expr):
                raise SourceError(f"vector entry {e!r} is not an expression")
        self.n = len(entries)
        super().__init__(entries, allowed_vars)

    def _flat(self):
        return list(self.entries)

    def __call__(self, t: float, x=None) -> np.ndarray:
        env = {"t": float(t)}
        if x is not None:
            for i, xi in enumerate(x):
                env[f"x{i + 1}"] = float(xi)
        out = np.empty(self.n)
        for i, e in enumerate(self.entries):
            try:
                out[i] = _eval(e, env)
            except EvalError as exc:
                raise EvalError(f"entry {i + 1}: {exc.message}", exc.offset) from None
        return out

    def __eq__(self, other):
        return isinstance(other, VectorFunction) and self.entries == other.entries

    __hash__ = None

    def formatted(self):
        return [format_expr(e) for e in self.entries]

    def compiled(self) -> Callable[..., np.ndarray]:
        if self._compiled is not None:
            return self._compiled
        names = self._names()
        body = ", ".join(_gen(e) for e in self.entries)
        g = dict(_GEN_GLOBALS)
        g["_array"] = np.array
        raw = eval(f"lambda {', '.join(names)}: _array([{body}])", g)
        state = self.state_dependent

        def fn(t, x=None):
            try:
                out = raw(t, *x) if state else raw(t)
            except Exception:
                out = None
            if out is None or not np.isfinite(out).all():
                return self(t, x)
            return out

        self._compiled = fn
        return fn


def eval_matrix(F: MatrixFunction, t: float, x=None) -> np.ndarray:
    """Evaluate a MatrixFunction entrywise; EvalErrors are annotated with
    the (row, column) of the failing entry, 1-based."""
    env = {"t": float(t)}
    if x is not None:
        for i, xi in enumerate(x):
            env[f"x{i + 1}"] = float(xi)
    n = F.n
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            try:
                out[i, j] = _eval(F.entries[i][j], env)
            except EvalError as exc:
                raise EvalError(
                    f"entry ({i + 1},{j + 1}): {exc.message}", exc.offset) from None
    return out


def parse_matrix(rows, allowed_vars=("t",)) -> MatrixFunction:
    """Parse a square list-of-lists of expression strings."""
    if not isinstance(rows, (list, tuple)):
        raise SourceError("matrix must be a list of rows")
    parsed = []
    for row in rows:
        if not isinstance(row, (list, tuple)):
            raise SourceError("matrix rows must be lists of expression strings")
        parsed.append([parse(s, allowed_vars) for s in row])
    return MatrixFunction(parsed, allowed_vars)


def parse_vector(items, allowed_vars=("t",)) -> VectorFunction:
    """Parse a list of expression strings into a VectorFunction."""
    if not isinstance(items, (list, tuple)):
        raise SourceError("vector must be a list of expression strings")
    return VectorFunction([parse(s, allowed_vars) for s in items], allowed_vars)
