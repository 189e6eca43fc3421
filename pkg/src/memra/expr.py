"""Scalar expression language with forward-mode differentiation.

Grammar (whitespace is insignificant)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" INTEGER)*
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sin" | "cos" | "exp" | "tanh"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
             | "." digits [exponent]
    INTEGER := digits

``^`` binds tighter than unary minus, so ``-q^2`` is ``-(q^2)``.
Exponents are non-negative integer literals only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "tanh")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # "+", "-", "*", "/"
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Const, Var, Unary, Binary, Pow]


@dataclass(frozen=True)
class ExpressionAst:
    """An immutable expression tree together with its declared variable set."""

    root: Node
    variables: frozenset

    def __str__(self):
        return to_text(self.root)

    def free_variables(self):
        return free_variables(self.root)

    def depends_on(self, name):
        return name in self.free_variables()


# -- tokenizer / parser -------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, allowed):
        self.tokens = _tokenize(text)
        self.idx = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.idx]

    def take(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        while self.peek()[:2] == ("op", "^"):
            self.take()
            kind, text, pos = self.take()
            if kind != "number" or not text.isdigit():
                raise ExpressionSyntaxError("exponent must be a non-negative integer literal", pos)
            node = Pow(node, int(text))
        return node

    def atom(self):
        kind, text, pos = self.take()
        if kind == "number":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text not in self.allowed:
                raise UnknownIdentifierError(text, self.allowed)
            return Var(text)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", pos)


def parse_expression(text: str, allowed_vars) -> ExpressionAst:
    """Parse ``text`` into an :class:`ExpressionAst` over ``allowed_vars``."""
    allowed = frozenset(allowed_vars)
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    root = _Parser(text, allowed).parse()
    return ExpressionAst(root, allowed)


# -- printing -----------------------------------------------------------------

def to_text(node: Node) -> str:
    """Fully parenthesized text that parses back to an identical tree."""
    if isinstance(node, Const):
        return repr(node.value) if node.value >= 0 else f"(-{-node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.arg)})"
        return f"{node.op}({to_text(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        # every printed form of a base already parses as an atom
        return f"{to_text(node.base)}^{node.exponent}"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Unary):
        return free_variables(node.arg)
    if isinstance(node, Pow):
        return free_variables(node.base)
    return free_variables(node.left) | free_variables(node.right)


# -- evaluation ---------------------------------------------------------------

def _root(ast):
    return ast.root if isinstance(ast, ExpressionAst) else ast


def eval(ast, assignment: Mapping[str, float]) -> float:  # noqa: A001
    """Evaluate the expression at ``assignment``."""
    return _dual(_root(ast), assignment, None)[0]


def partial(ast, var: str, assignment: Mapping[str, float]) -> float:
    """Exact derivative of the expression with respect to ``var`` at ``assignment``."""
    return _dual(_root(ast), assignment, var)[1]


def value_and_partial(ast, var, assignment):
    return _dual(_root(ast), assignment, var)


def _dual(node, env, var):
    """Return (value, d value / d var) by forward-mode propagation."""
    try:
        return _dual_unchecked(node, env, var)
    except OverflowError:
        raise ExpressionDomainError("overflow", to_text(node)) from None


def _dual_unchecked(node, env, var):
    if isinstance(node, Const):
        return node.value, 0.0
    if isinstance(node, Var):
        return float(env[node.name]), (1.0 if node.name == var else 0.0)
    if isinstance(node, Binary):
        a, da = _dual_unchecked(node.left, env, var)
        b, db = _dual_unchecked(node.right, env, var)
        op = node.op
        if op == "+":
            return a + b, da + db
        if op == "-":
            return a - b, da - db
        if op == "*":
            return a * b, da * b + a * db
        if b == 0.0:
            raise ExpressionDomainError("division by zero", to_text(node))
        return a / b, (da * b - a * db) / (b * b)
    if isinstance(node, Unary):
        a, da = _dual_unchecked(node.arg, env, var)
        op = node.op
        if op == "neg":
            return -a, -da
        if op == "sin":
            return math.sin(a), math.cos(a) * da
        if op == "cos":
            return math.cos(a), -math.sin(a) * da
        if op == "exp":
            e = math.exp(a)
            return e, e * da
        th = math.tanh(a)
        return th, (1.0 - th * th) * da
    if isinstance(node, Pow):
        a, da = _dual_unchecked(node.base, env, var)
        k = node.exponent
        if k == 0:
            return 1.0, 0.0
        return a**k, k * a ** (k - 1) * da
    raise TypeError(f"not an expression node: {node!r}")
