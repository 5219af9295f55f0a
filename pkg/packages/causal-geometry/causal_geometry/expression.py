"""Expression language for user-supplied defining functions.

Grammar (whitespace insensitive)::

    inequality := sum ('<' | '>' | '<=' | '>=') sum
    sum        := product (('+' | '-') product)*
    product    := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' unary)?          # right-associative
    atom       := number | variable | function '(' sum (',' sum)* ')' | '(' sum ')'

Variables are ``x1..xn`` and ``v1..vn``; functions are exp, log, sqrt, sin, cos
and the two-argument pow. Evaluation works on floats and on :class:`~.jets.Jet`
values alike, so the same tree yields values and exact derivatives.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Mapping, Sequence

from . import jets
from .errors import DomainError, ExpressionError

_TOKEN_PATTERN = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|[-+*/^(),<>])
    """,
    re.VERBOSE,
)

_VARIABLE_PATTERN = re.compile(r"([xv])([1-9][0-9]*)")

_COMPARISONS = ("<", ">", "<=", ">=")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int  # byte offset into the source


def tokenize(src: str) -> list[Token]:
    """Split ``src`` into tokens, recording byte offsets."""
    tokens = []
    index = 0
    while index < len(src):
        match = _TOKEN_PATTERN.match(src, index)
        if match is None:
            raise ExpressionError(
                f"unexpected character {src[index]!r}", _offset(src, index), src
            )
        kind = match.lastgroup
        assert kind is not None
        if kind != "space":
            tokens.append(Token(kind, match.group(), _offset(src, index)))
        index = match.end()
    tokens.append(Token("end", "", _offset(src, len(src))))
    return tokens


def _offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


def variable_environment(
    n: int, x: Sequence[Any], v: Sequence[Any]
) -> dict[str, Any]:
    """Bind ``x1..xn`` and ``v1..vn`` to the given values."""
    env = {f"x{a + 1}": x[a] for a in range(n)}
    env.update({f"v{a + 1}": v[a] for a in range(n)})
    return env


# -- syntax tree ---------------------------------------------------------------


class Node:
    """Base class of expression tree nodes."""

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    def children(self) -> Sequence[Node]:
        return ()

    def to_source(self) -> str:
        raise NotImplementedError

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    def walk(self) -> Iterator[Node]:
        yield self
        for child in self.children():
            yield from child.walk()

    def variables(self) -> set[str]:
        return {node.name for node in self.walk() if isinstance(node, Variable)}


@dataclass(frozen=True)
class Number(Node):
    value: float

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        return self.value

    def to_source(self) -> str:
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        import sympy

        if float(self.value).is_integer():
            return sympy.Integer(int(self.value))
        return sympy.Float(self.value)


@dataclass(frozen=True)
class Variable(Node):
    name: str

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        return env[self.name]

    def to_source(self) -> str:
        return self.name

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        return symbols[self.name]


@dataclass(frozen=True)
class Negate(Node):
    operand: Node

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        return -self.operand.evaluate(env)

    def children(self) -> Sequence[Node]:
        return (self.operand,)

    def to_source(self) -> str:
        return f"(-{self.operand.to_source()})"

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        return -self.operand.to_sympy(symbols)


def _divide(a: Any, b: Any) -> Any:
    if not isinstance(a, jets.Jet) and not isinstance(b, jets.Jet) and b == 0:
        raise DomainError("division by zero")
    return a / b


def _raise(base: Any, exponent: Any, constant_exponent: bool) -> Any:
    if constant_exponent:
        return jets.power(base, float(exponent))
    return jets.exp(exponent * jets.log(base))


_BINARY: dict[str, Callable[[Any, Any], Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _divide,
}


@dataclass(frozen=True)
class BinaryOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        left = self.left.evaluate(env)
        right = self.right.evaluate(env)
        if self.op == "^":
            return _raise(left, right, not self.right.variables())
        return _BINARY[self.op](left, right)

    def children(self) -> Sequence[Node]:
        return (self.left, self.right)

    def to_source(self) -> str:
        return f"({self.left.to_source()} {self.op} {self.right.to_source()})"

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        left = self.left.to_sympy(symbols)
        right = self.right.to_sympy(symbols)
        if self.op == "^":
            return left**right
        if self.op == "/":
            return left / right
        if self.op == "*":
            return left * right
        return left + right if self.op == "+" else left - right


# name -> (arity, evaluator, sympy attribute)
FUNCTIONS: dict[str, tuple[int, Callable[..., Any], str]] = {
    "exp": (1, jets.exp, "exp"),
    "log": (1, jets.log, "log"),
    "sqrt": (1, jets.sqrt, "sqrt"),
    "sin": (1, jets.sin, "sin"),
    "cos": (1, jets.cos, "cos"),
    "pow": (2, lambda a, b: _raise(a, b, False), "Pow"),
}


@dataclass(frozen=True)
class Call(Node):
    function: str
    args: tuple[Node, ...]

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        values = [arg.evaluate(env) for arg in self.args]
        if self.function == "pow":
            return _raise(values[0], values[1], not self.args[1].variables())
        return FUNCTIONS[self.function][1](*values)

    def children(self) -> Sequence[Node]:
        return self.args

    def to_source(self) -> str:
        args = ", ".join(arg.to_source() for arg in self.args)
        return f"{self.function}({args})"

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        import sympy

        func = getattr(sympy, FUNCTIONS[self.function][2])
        return func(*(arg.to_sympy(symbols) for arg in self.args))


@dataclass(frozen=True)
class Expression:
    """Parsed expression over ``x1..xn, v1..vn``."""

    root: Node
    n: int
    source: str = ""

    def environment(self, x: Sequence[Any], v: Sequence[Any]) -> dict[str, Any]:
        return variable_environment(self.n, x, v)

    def evaluate(self, x: Sequence[Any], v: Sequence[Any]) -> Any:
        return self.root.evaluate(self.environment(x, v))

    @property
    def variables(self) -> set[str]:
        return self.root.variables()

    @property
    def depends_on_velocity(self) -> bool:
        return any(name.startswith("v") for name in self.variables)

    def to_source(self) -> str:
        return self.root.to_source()

    def to_sympy(self, symbols: Mapping[str, Any]) -> Any:
        return self.root.to_sympy(symbols)


@dataclass(frozen=True)
class Inequality:
    """Domain predicate ``left op right``; holds strictly for < and >."""

    left: Node
    op: str
    right: Node
    n: int
    source: str = ""

    def margin(self, x: Sequence[float], v: Sequence[float]) -> float:
        """Signed slack: positive inside the region."""
        env = variable_environment(self.n, x, v)
        difference = float(self.left.evaluate(env) - self.right.evaluate(env))
        return difference if self.op in (">", ">=") else -difference

    def holds(self, x: Sequence[float], v: Sequence[float]) -> bool:
        try:
            slack = self.margin(x, v)
        except DomainError:
            return False
        return slack > 0 if self.op in ("<", ">") else slack >= 0

    def to_source(self) -> str:
        return f"{self.left.to_source()} {self.op} {self.right.to_source()}"


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.tokens = tokenize(src)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def error(self, message: str, token: Token | None = None) -> ExpressionError:
        token = token or self.current
        return ExpressionError(message, token.position, self.src)

    def expect(self, text: str) -> Token:
        if self.current.text != text or self.current.kind != "op":
            found = self.current.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def expect_end(self) -> None:
        if self.current.kind != "end":
            raise self.error(f"unexpected token {self.current.text!r}")

    def parse_sum(self) -> Node:
        node = self.parse_product()
        while self.current.kind == "op" and self.current.text in ("+", "-"):
            op = self.advance().text
            node = BinaryOp(op, node, self.parse_product())
        return node

    def parse_product(self) -> Node:
        node = self.parse_unary()
        while self.current.kind == "op" and self.current.text in ("*", "/"):
            op = self.advance().text
            node = BinaryOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Node:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return Negate(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            return BinaryOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self.advance()
            return Number(float(token.text))
        if token.kind == "name":
            self.advance()
            if self.current.kind == "op" and self.current.text == "(":
                return self.parse_call(token)
            return self.variable(token)
        if token.kind == "op" and token.text == "(":
            self.advance()
            node = self.parse_sum()
            self.expect(")")
            return node
        if token.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected token {token.text!r}")

    def parse_call(self, name: Token) -> Node:
        if name.text not in FUNCTIONS:
            raise self.error(f"unknown function {name.text!r}", name)
        self.expect("(")
        args = [self.parse_sum()]
        while self.current.kind == "op" and self.current.text == ",":
            self.advance()
            args.append(self.parse_sum())
        self.expect(")")
        arity = FUNCTIONS[name.text][0]
        if len(args) != arity:
            raise self.error(
                f"{name.text} expects {arity} argument(s), got {len(args)}", name
            )
        return Call(name.text, tuple(args))

    def variable(self, token: Token) -> Node:
        match = _VARIABLE_PATTERN.fullmatch(token.text)
        if match is None or int(match.group(2)) > self.n:
            raise self.error(f"unknown identifier {token.text!r}", token)
        return Variable(token.text)


def parse_expression(src: str, n: int) -> Expression:
    """Parse ``src`` into an :class:`Expression` over n base and n velocity variables.

    Raises:
        ExpressionError: on syntax errors, unknown identifiers or wrong arity;
            ``position`` is the byte offset of the offending token
    """
    parser = _Parser(src, n)
    root = parser.parse_sum()
    parser.expect_end()
    return Expression(root, n, src)


def parse_inequality(src: str, n: int) -> Inequality:
    """Parse a domain predicate such as ``"v2 > 0"``."""
    parser = _Parser(src, n)
    left = parser.parse_sum()
    token = parser.current
    if token.kind != "op" or token.text not in _COMPARISONS:
        raise parser.error("expected a comparison operator")
    parser.advance()
    right = parser.parse_sum()
    parser.expect_end()
    return Inequality(left, token.text, right, n, src)


__all__ = [
    "Token",
    "tokenize",
    "Node",
    "Number",
    "Variable",
    "Negate",
    "BinaryOp",
    "Call",
    "FUNCTIONS",
    "Expression",
    "Inequality",
    "parse_expression",
    "parse_inequality",
]
