"""Coefficient expressions for config files.

Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?
    exponent:= '-'? NUMBER ('^' exponent)?
    atom    := NUMBER | 'i' | 'x1' | 'x2' | 'x3' | NAME | FUNC '(' expr ')' | '(' expr ')'

``FUNC`` is one of ``log exp sin cos abs sqrt``.  ``abs(x)`` with the bare
token ``x`` is the Euclidean norm of the point; ``abs(e)`` of any other
expression is the scalar modulus.  Any other ``NAME`` is a parameter that
must be bound at evaluation time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

FUNCTIONS = ("log", "exp", "sin", "cos", "abs", "sqrt")


class ExprError(ValueError):
    def __init__(self, msg, line=None, col=None):
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(msg + where)
        self.line, self.col = line, col


# ----------------------------------------------------------------- AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Imag:
    pass


@dataclass(frozen=True)
class Var:
    index: int  # 1-based coordinate


@dataclass(frozen=True)
class NormX:
    pass


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


# ------------------------------------------------------------- tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[_Tok]:
    out, pos, line, col0 = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, col0 = line + 1, m.end()
        elif kind != "ws":
            out.append(_Tok(kind, m.group(), line, m.start() - col0 + 1))
        pos = m.end()
    out.append(_Tok("end", "", line, pos - col0 + 1))
    return out


# ---------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text, params):
        self.toks = tokenize(text)
        self.i = 0
        self.params = params

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprError(msg, tok.line, tok.col)

    def expect(self, text):
        t = self.peek()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek().kind != "end":
            self.fail(f"unexpected {self.peek().text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek().text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().text == "^":
            self.take()
            return Bin("^", base, self.exponent())
        return base

    def exponent(self):
        neg = False
        if self.peek().text == "-":
            self.take()
            neg = True
        t = self.peek()
        if t.kind != "num":
            self.fail("exponent must be a numeric literal")
        self.take()
        node = Num(float(t.text))
        if self.peek().text == "^":
            self.take()
            node = Bin("^", node, self.exponent())
        return Neg(node) if neg else node

    def atom(self):
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            self.take()
            name = t.text
            if name in FUNCTIONS:
                self.expect("(")
                if name == "abs" and self.peek().text == "x" and self.toks[self.i + 1].text == ")":
                    self.take()
                    self.expect(")")
                    return NormX()
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name == "i":
                return Imag()
            if re.fullmatch(r"x[123]", name):
                return Var(int(name[1]))
            if name == "x":
                self.fail("bare 'x' is only allowed as abs(x)", t)
            if self.params is not None and name not in self.params:
                self.fail(f"unknown identifier {name!r}", t)
            return Param(name)
        self.fail(f"unexpected {t.text or 'end of input'!r}")


def parse(text: str, params=None):
    """Parse an expression; with ``params`` given, other names are rejected."""
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, None if params is None else set(params)).parse()


def pretty(node) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, NormX):
        return "abs(x)"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.arg)})"
    if isinstance(node, Bin):
        if node.op == "^":
            return f"({pretty(node.left)} ^ {_pretty_exponent(node.right)})"
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    if isinstance(node, Call):
        return f"{node.fn}({pretty(node.arg)})"
    raise ExprError(f"not an expression node: {node!r}")


def _pretty_exponent(node) -> str:
    if isinstance(node, Neg):
        return "-" + _pretty_exponent(node.arg)
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Bin) and node.op == "^":
        return f"{_pretty_exponent(node.left)} ^ {_pretty_exponent(node.right)}"
    raise ExprError("exponent must be a numeric literal")


def free_parameters(node) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Neg):
        return free_parameters(node.arg)
    if isinstance(node, Bin):
        return free_parameters(node.left) | free_parameters(node.right)
    if isinstance(node, Call):
        return free_parameters(node.arg)
    return set()


# ------------------------------------------------------------ evaluation


class _Evaluator:
    def __init__(self, coords, params):
        self.coords = coords
        self.params = params
        self.shape = coords[0].shape if coords else (1,)

    def node_error(self, msg, bad):
        idx = np.unravel_index(int(np.flatnonzero(np.broadcast_to(bad, self.shape))[0]), self.shape)
        x = tuple(float(c[idx]) for c in self.coords)
        raise ExprError(f"{msg} at node {tuple(int(i) for i in idx)} (x = {x})")

    def ev(self, node):
        if isinstance(node, Num):
            return np.complex128(node.value)
        if isinstance(node, Imag):
            return np.complex128(1j)
        if isinstance(node, Var):
            if node.index > len(self.coords):
                raise ExprError(f"x{node.index} used on a {len(self.coords)}-dimensional grid")
            return self.coords[node.index - 1].astype(complex)
        if isinstance(node, NormX):
            return np.sqrt(sum(c ** 2 for c in self.coords)).astype(complex)
        if isinstance(node, Param):
            if node.name not in self.params:
                raise ExprError(f"unbound parameter {node.name!r}")
            return np.complex128(self.params[node.name])
        if isinstance(node, Neg):
            return -self.ev(node.arg)
        if isinstance(node, Call):
            return self.call(node.fn, self.ev(node.arg))
        if isinstance(node, Bin):
            a, b = self.ev(node.left), self.ev(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                if np.any(b == 0):
                    self.node_error("division by zero", b == 0)
                return a / b
            if node.op == "^":
                e = complex(b)
                if e.imag == 0 and float(e.real).is_integer():
                    k = int(e.real)
                    if k < 0 and np.any(a == 0):
                        self.node_error("zero raised to a negative power", a == 0)
                    return a ** k
                return a ** e
        raise ExprError(f"not an expression node: {node!r}")

    def call(self, fn, v):
        if fn == "log":
            bad = (v.imag == 0) & (v.real <= 0)
            if np.any(bad):
                self.node_error("log of a nonpositive real", bad)
            return np.log(v)
        if fn == "exp":
            return np.exp(v)
        if fn == "sin":
            return np.sin(v)
        if fn == "cos":
            return np.cos(v)
        if fn == "abs":
            return np.abs(v).astype(complex)
        if fn == "sqrt":
            return np.sqrt(v)
        raise ExprError(f"unknown function {fn!r}")


def eval_on_grid(expr, grid: GridSpec, params=None) -> np.ndarray:
    """Evaluate at every node; returns a complex array of ``grid.shape``."""
    node = parse(expr) if isinstance(expr, str) else expr
    ev = _Evaluator(grid.coords(), dict(params or {}))
    with np.errstate(all="ignore"):
        out = np.broadcast_to(ev.ev(node), grid.shape).astype(complex)
    bad = ~np.isfinite(out)
    if np.any(bad):
        ev.node_error("non-finite value", bad)
    return out


def evaluate(expr, point, params=None) -> complex:
    """Evaluate at a single point (a sequence of coordinates)."""
    node = parse(expr) if isinstance(expr, str) else expr
    coords = [np.array([float(v)]) for v in point]
    ev = _Evaluator(coords, dict(params or {}))
    with np.errstate(all="ignore"):
        val = complex(np.ravel(ev.ev(node))[0])
    if not np.isfinite(val):
        raise ExprError(f"non-finite value at {tuple(point)}")
    return val
