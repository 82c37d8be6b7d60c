"""Small arithmetic expression language for potentials, with symbolic derivatives.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'y' | 'pi' | FUNC '(' expr ')' | '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "abs")
VARIABLES = ("x", "y")


class ExprError(ValueError):
    """Lexer, parser or evaluation error; ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} at offset {offset}")
        self.offset = offset


# -- tree ------------------------------------------------------------------


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
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


# -- lexer and parser ------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def _tokenize(src: str):
    tokens = []
    pos = 0
    raw = src.encode()
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            start = len(src[:pos]) + len(src[pos:]) - len(src[pos:].lstrip())
            offset = len(src[:start].encode())
            raise ExprError(f"unexpected character {src[start]!r}", offset)
        kind = m.lastgroup
        offset = len(src[: m.start(kind)].encode())
        tokens.append((kind, m.group(kind), offset))
        pos = m.end()
    tokens.append(("end", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExprError(f"expected {value!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ExprError(f"unknown function {text!r}", off)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(text)
            if text == "pi":
                return Num(math.pi)
            if text in FUNCTIONS:
                raise ExprError(f"function {text!r} needs an argument", off)
            raise ExprError(f"unknown identifier {text!r}", off)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprError(f"unexpected {found}", off)


# -- simplifying constructors ----------------------------------------------


def _is(node, value):
    return isinstance(node, Num) and node.value == value


def add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Bin("+", a, b)


def sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Bin("-", a, b)


def mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return Num(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Bin("*", a, b)


def div(a, b):
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    if _is(a, 0):
        return Num(0.0)
    if _is(b, 1):
        return a
    return Bin("/", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def pow_(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value**b.value)
    if _is(b, 0):
        return Num(1.0)
    if _is(b, 1):
        return a
    return Bin("^", a, b)


def _depends(node, var):
    if isinstance(node, Var):
        return node.name == var
    if isinstance(node, Num):
        return False
    if isinstance(node, (Neg, Call)):
        return _depends(node.arg, var)
    return _depends(node.left, var) or _depends(node.right, var)


def differentiate(node, var="x"):
    """Symbolic derivative with constant folding."""
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0 if node.name == var else 0.0)
    if isinstance(node, Neg):
        return neg(differentiate(node.arg, var))
    if isinstance(node, Call):
        u = node.arg
        du = differentiate(u, var)
        if _is(du, 0):
            return Num(0.0)
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: neg(Call("sin", u)),
            "exp": lambda: node,
            "log": lambda: div(Num(1.0), u),
            "abs": lambda: div(u, Call("abs", u)),
        }[node.func]()
        return mul(outer, du)
    a, b = node.left, node.right
    da, db = differentiate(a, var), differentiate(b, var)
    if node.op == "+":
        return add(da, db)
    if node.op == "-":
        return sub(da, db)
    if node.op == "*":
        return add(mul(da, b), mul(a, db))
    if node.op == "/":
        return div(sub(mul(da, b), mul(a, db)), pow_(b, Num(2.0)))
    # a^b
    if not _depends(b, var):
        return mul(mul(b, pow_(a, sub(b, Num(1.0)))), da)
    return mul(node, add(mul(db, Call("log", a)), div(mul(b, da), a)))


def _fmt_num(v: float) -> str:
    if v == math.pi:
        return "pi"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(node, parent: int = 0, right: bool = False) -> str:
    """Print with the minimum parentheses that reparse to the same tree."""
    if isinstance(node, Num):
        text = _fmt_num(node.value)
        # negative literals parse as negation, so wrap them like a Neg node
        if node.value < 0 and parent >= PRECEDENCE["neg"]:
            return f"({text})"
        return text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.arg, PRECEDENCE["neg"])
        text = f"-{inner}"
        return f"({text})" if parent > PRECEDENCE["neg"] or (parent == PRECEDENCE["neg"] and right) else text
    prec = PRECEDENCE[node.op]
    if node.op == "^":
        left = to_string(node.left, prec + 1)
        right_text = to_string(node.right, PRECEDENCE["neg"], right=False)
    else:
        left = to_string(node.left, prec)
        right_text = to_string(node.right, prec + 1)
    text = f"{left}{node.op}{right_text}" if node.op == "^" else f"{left} {node.op} {right_text}"
    return f"({text})" if prec < parent else text


def evaluate(node, x=None, y=None):
    """Evaluate on arrays; domain errors report the first offending coordinate."""
    env = {"x": x, "y": y}
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    out = np.asarray(out, dtype=float)
    bad = ~np.isfinite(out)
    if np.any(bad):
        shape = np.broadcast(*(np.asarray(v) for v in env.values() if v is not None)).shape if any(
            v is not None for v in env.values()
        ) else ()
        out_b = np.broadcast_to(out, shape) if shape else out
        idx = np.argwhere(~np.isfinite(out_b))
        where = []
        if idx.size:
            first = tuple(idx[0])
            for name in ("x", "y"):
                if env[name] is not None:
                    where.append(f"{name}={np.broadcast_to(env[name], shape)[first]:.6g}")
        raise ExprError(f"expression is not finite at {', '.join(where) or 'constant'}")
    return out


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        val = env[node.name]
        if val is None:
            raise ExprError(f"variable {node.name!r} is not available on this grid")
        return np.asarray(val, dtype=float)
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        fn = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "abs": np.abs}[node.func]
        return fn(_eval(node.arg, env))
    a, b = _eval(node.left, env), _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return np.divide(a, b)
    return np.power(a, b)


@dataclass(frozen=True)
class PotentialExpr:
    """Parsed potential with cached first and second derivatives."""

    tree: object

    def __call__(self, x=None, y=None):
        val = evaluate(self.tree, x, y)
        ref = x if x is not None else y
        return np.broadcast_to(val, np.shape(ref)).copy() if ref is not None else val

    def derivative(self, var="x", order=1) -> "PotentialExpr":
        tree = self.tree
        for _ in range(order):
            tree = differentiate(tree, var)
        return PotentialExpr(tree)

    def uses(self, var: str) -> bool:
        return _depends(self.tree, var)

    def __str__(self):
        return to_string(self.tree)


def parse_potential(src) -> PotentialExpr:
    """Parse an expression string, or a coefficient list ``[c0, c1, ...]`` meaning ``Σ c_k x^k``."""
    if isinstance(src, (list, tuple)):
        if not src:
            raise ExprError("coefficient list is empty")
        tree = Num(0.0)
        for k, c in enumerate(src):
            tree = add(tree, mul(Num(float(c)), pow_(Var("x"), Num(float(k)))))
        return PotentialExpr(tree)
    if not isinstance(src, str) or not src.strip():
        raise ExprError("empty expression", 0)
    return PotentialExpr(_Parser(src).parse())
