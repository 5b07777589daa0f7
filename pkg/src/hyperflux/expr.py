"""Arithmetic expression language for scalar fields and maps.

Expressions are parsed by recursive descent into an immutable tree and
evaluated with numpy, so a single tree evaluates either one point or a
whole batch of quadrature nodes at once.

Grammar (``^`` binds tighter than unary minus, and is right-associative)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "FieldExpr",
    "MapExpr",
    "parse_scalar",
    "parse_map",
    "evaluate",
    "to_source",
    "substitute",
    "FUNCTIONS",
    "CONSTANTS",
]


class ExprError(ValueError):
    """Base class for expression parsing errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, source: str = ""):
        self.position = position
        self.source = source
        super().__init__(f"{message} at offset {position}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at offset {position}")


# -- tree ------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


def _piecewise(cond, then, other):
    return np.where(cond > 0, then, other)


# name -> (callable, min arity, max arity)
FUNCTIONS = {
    "sin": (np.sin, 1, 1),
    "cos": (np.cos, 1, 1),
    "tan": (np.tan, 1, 1),
    "exp": (np.exp, 1, 1),
    "log": (np.log, 1, 1),
    "sqrt": (np.sqrt, 1, 1),
    "abs": (np.abs, 1, 1),
    "min": (None, 2, None),
    "max": (None, 2, None),
    "piecewise": (_piecewise, 3, 3),
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
}


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Sequence[str]):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.index = {name: k for k, name in enumerate(variables)}

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, tok, what=None):
        kind, text, pos = tok
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos, self.source)
        msg = f"unexpected token {text!r}"
        if what:
            msg += f", expected {what}"
        raise ExprSyntaxError(msg, pos, self.source)

    def expect(self, text):
        tok = self.advance()
        if tok[1] != text or tok[0] != "op":
            self.fail(tok, repr(text))
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail(tok, "end of input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                return self.call(text, pos)
            if text in self.index:
                return Var(text, self.index[text])
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            raise UnknownIdentifierError(text, pos)
        if tok[:2] == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail(tok, "a number, identifier or '('")

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(name, pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        _, lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprSyntaxError(
                f"{name}() takes {lo if lo == hi else f'at least {lo}'} argument(s), got {len(args)}",
                pos,
                self.source,
            )
        return Call(name, tuple(args))


# -- evaluation ------------------------------------------------------------


def _eval(node, X):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return X[..., node.index]
    if isinstance(node, Neg):
        return np.negative(_eval(node.operand, X))
    if isinstance(node, BinOp):
        return _BINARY[node.op](_eval(node.left, X), _eval(node.right, X))
    args = [_eval(a, X) for a in node.args]
    if node.name == "min":
        return _reduce(np.minimum, args)
    if node.name == "max":
        return _reduce(np.maximum, args)
    return FUNCTIONS[node.name][0](*args)


def _reduce(fn, args):
    out = args[0]
    for a in args[1:]:
        out = fn(out, a)
    return out


def _check_vars(variables):
    variables = tuple(variables)
    if not variables:
        raise ValueError("variable list must be non-empty")
    if len(set(variables)) != len(variables):
        raise ValueError(f"duplicate variable names in {variables}")
    for v in variables:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", v):
            raise ValueError(f"invalid variable name {v!r}")
        if v in FUNCTIONS or v in CONSTANTS:
            raise ValueError(f"variable name {v!r} shadows a builtin")
    return variables


@dataclass(frozen=True)
class FieldExpr:
    """A parsed scalar expression bound to an ordered variable list.

    Calling it with an array of shape ``(..., arity_in)`` returns an array of
    shape ``(...)``; a single point gives a 0-d array.
    """

    ast: Node
    variables: tuple
    source: str = ""

    @property
    def arity_in(self) -> int:
        return len(self.variables)

    def __call__(self, points):
        X = np.asarray(points, dtype=float)
        if X.shape[-1:] != (self.arity_in,):
            raise ValueError(
                f"expected points with last axis {self.arity_in}, got shape {X.shape}"
            )
        with np.errstate(all="ignore"):
            out = _eval(self.ast, X)
        return np.array(np.broadcast_to(out, X.shape[:-1]), dtype=float)

    def __str__(self):
        return self.source or to_source(self.ast)


@dataclass(frozen=True)
class MapExpr:
    """An ordered tuple of FieldExpr over one shared variable list."""

    components: tuple

    def __post_init__(self):
        if not self.components:
            raise ValueError("a map needs at least one component")
        vs = self.components[0].variables
        if any(c.variables != vs for c in self.components):
            raise ValueError("all map components must share one variable list")

    @property
    def variables(self):
        return self.components[0].variables

    @property
    def arity_in(self) -> int:
        return len(self.variables)

    @property
    def dim_out(self) -> int:
        return len(self.components)

    def __call__(self, points):
        X = np.asarray(points, dtype=float)
        return np.stack([c(X) for c in self.components], axis=-1)

    def __str__(self):
        return "(" + ", ".join(str(c) for c in self.components) + ")"


def parse_scalar(source: str, variables: Sequence[str]) -> FieldExpr:
    variables = _check_vars(variables)
    ast = _Parser(source, variables).parse()
    return FieldExpr(ast, variables, source)


def parse_map(sources: Sequence[str], variables: Sequence[str]) -> MapExpr:
    if isinstance(sources, str) or not sources:
        raise ValueError("parse_map needs a non-empty list of component sources")
    comps = []
    for k, src in enumerate(sources, start=1):
        try:
            comps.append(parse_scalar(src, variables))
        except ExprError as exc:
            exc.component = k
            exc.args = (f"component {k}: {exc}",)
            raise
    return MapExpr(tuple(comps))


def evaluate(field: FieldExpr, point) -> float:
    """Evaluate at a single point. Non-finite results (1/0, sqrt(-1)) come
    back as inf/nan rather than raising; callers flag them."""
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape != (field.arity_in,):
        raise ValueError(f"expected {field.arity_in} coordinates, got {point.shape[0]}")
    return float(field(point))


# -- printing and rewriting ------------------------------------------------


def to_source(node: Node) -> str:
    """Fully parenthesized source text that re-parses to the same tree."""
    if isinstance(node, Num):
        if not math.isfinite(node.value):
            raise ValueError(f"cannot print literal {node.value!r}")
        if node.value < 0:
            return f"(-{-node.value!r})"
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    return f"{node.name}(" + ", ".join(to_source(a) for a in node.args) + ")"


def substitute(node: Node, mapping: dict, variables: Sequence[str]) -> Node:
    """Replace variables by subtrees; surviving Var nodes are re-indexed
    against ``variables``."""
    index = {name: k for k, name in enumerate(variables)}

    def walk(n):
        if isinstance(n, Var):
            if n.name in mapping:
                return substitute(mapping[n.name], {}, variables)
            if n.name not in index:
                raise UnknownIdentifierError(n.name, -1)
            return Var(n.name, index[n.name])
        if isinstance(n, Neg):
            return Neg(walk(n.operand))
        if isinstance(n, BinOp):
            return BinOp(n.op, walk(n.left), walk(n.right))
        if isinstance(n, Call):
            return Call(n.name, tuple(walk(a) for a in n.args))
        return n

    return walk(node)


def reindex(node: Node, variables: Sequence[str]) -> Node:
    """Re-resolve Var indices (mapped Var subtrees may come from other lists)."""
    return substitute(node, {}, variables)
