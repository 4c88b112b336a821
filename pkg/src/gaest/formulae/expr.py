"""Arithmetic expressions over biometry variables: parser, printer and evaluator.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" unary)?          # right-associative
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Literals are non-negative; a leading minus is always a ``Neg`` node.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from gaest.errors import FormulaEvalError, FormulaSyntaxError

VARIABLES = ("bpd", "hc", "ac", "fl", "crl")
FUNCTIONS = ("ln", "exp", "sqrt")


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"literal must be finite and non-negative, got {self.value}")


@dataclass(frozen=True)
class Var:
    name: str


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
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(bad, f"unexpected character {text[bad]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables):
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = tuple(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise FormulaSyntaxError(pos, f"expected {value!r}, found {found}")

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text not in self.variables:
                raise FormulaSyntaxError(
                    pos, f"unknown identifier {text!r}; allowed variables: {', '.join(self.variables)}; "
                         f"functions: {', '.join(FUNCTIONS)}"
                )
            return Var(text)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise FormulaSyntaxError(pos, f"expected a number, variable, function or '(', found {found}")


def parse_expression(text: str, variables=VARIABLES) -> Node:
    if not text or not text.strip():
        raise FormulaSyntaxError(0, "empty expression")
    parser = _Parser(text, variables)
    node = parser.expr()
    kind, tok, pos = parser.peek()
    if kind != "end":
        raise FormulaSyntaxError(pos, f"unexpected {tok!r} after complete expression")
    return node


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _wrap(node: Node, min_prec: int) -> str:
    s = to_text(node)
    return f"({s})" if _prec(node) < min_prec else s


def to_text(node: Node) -> str:
    """Render with the minimum parentheses needed to reparse to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, 3)
    p = _PREC[node.op]
    if node.op == "^":
        return f"{_wrap(node.left, 5)}^{_wrap(node.right, 3)}"
    return f"{_wrap(node.left, p)} {node.op} {_wrap(node.right, p + 1)}"


def variables_of(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return variables_of(node.operand if isinstance(node, Neg) else node.arg)
    return variables_of(node.left) | variables_of(node.right)


def evaluate(node: Node, env: Mapping[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name not in env or env[node.name] is None:
            raise FormulaEvalError(f"missing variable {node.name!r}")
        return float(env[node.name])
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        x = evaluate(node.arg, env)
        if node.func == "ln":
            if x <= 0:
                raise FormulaEvalError(f"ln of non-positive value {x}")
            return math.log(x)
        if node.func == "sqrt":
            if x < 0:
                raise FormulaEvalError(f"sqrt of negative value {x}")
            return math.sqrt(x)
        try:
            return math.exp(x)
        except OverflowError:
            raise FormulaEvalError(f"exp({x}) overflows") from None
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if b == 0:
            raise FormulaEvalError("division by zero")
        return a / b
    try:
        r = a ** b
    except (OverflowError, ZeroDivisionError) as exc:
        raise FormulaEvalError(f"{a}^{b}: {exc}") from None
    if isinstance(r, complex):
        raise FormulaEvalError(f"{a}^{b} is not real")
    return r
