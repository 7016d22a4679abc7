"""Expression DSL for candidate functions over the reals.

Grammar:

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

NUMBER is an unsigned decimal literal with optional fraction and exponent
("2", "0.5", ".5", "1e-3").  IDENT is a letter followed by letters, digits
or underscores; an IDENT directly followed by "(" is a builtin call, any
other IDENT is a free variable.  "^" is right-associative; its base is an
atom, so "-x^2" means -(x^2) while "x^-2" carries the sign in the exponent.

Evaluation is plain float arithmetic and deterministic: the same expression
and environment always produce the same bits.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping

__all__ = [
    "Expr", "Const", "Var", "Neg", "BinOp", "Call",
    "BUILTIN_ARITY", "ParseError", "EvaluationError",
    "UnboundVariableError", "EvalDomainError",
    "parse", "evaluate", "format_expr", "free_variables",
]

# Builtin name -> required argument count.  "^" covers exponentiation; there
# is deliberately no variadic min/max at the expression level.
BUILTIN_ARITY = {
    "abs": 1, "floor": 1, "ceil": 1, "sign": 1, "relu": 1,
    "exp": 1, "ln": 1, "sqrt": 1,
    "min": 2, "max": 2,
    "clamp": 3,
}

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?")


class ParseError(ValueError):
    """Syntax error with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class EvaluationError(ValueError):
    """Base class for evaluation failures."""


class UnboundVariableError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class EvalDomainError(EvaluationError):
    """Arithmetic left the real domain (division by zero, ln of a
    non-positive number, overflow to infinity, ...)."""

    def __init__(self, node: "Expr", inputs: tuple, detail: str):
        super().__init__(
            f"{detail} in {format_expr(node)!r} with arguments {inputs}")
        self.node = node
        self.inputs = inputs
        self.detail = detail


class Expr:
    """Base class for AST nodes.  Nodes are immutable and compare
    structurally."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True)
class Const(Expr):
    literal: str
    value: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            v = float(self.literal)
        except ValueError:
            raise ValueError(f"bad numeric literal {self.literal!r}") from None
        if not math.isfinite(v):
            raise ValueError(f"literal {self.literal!r} is not finite")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self):
        if not _IDENT_RE.fullmatch(self.name):
            raise ValueError(f"bad variable name {self.name!r}")


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/", "^"):
            raise ValueError(f"bad operator {self.op!r}")

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]

    def __post_init__(self):
        arity = BUILTIN_ARITY.get(self.func)
        if arity is None:
            raise ValueError(f"unknown builtin {self.func!r}")
        if len(self.args) != arity:
            raise ValueError(
                f"{self.func} takes {arity} argument(s), got {len(self.args)}")
        object.__setattr__(self, "args", tuple(self.args))

    def children(self):
        return self.args


# ---------------------------------------------------------------------------
# tokenizer

@dataclass(frozen=True)
class _Token:
    kind: str  # number ident op lparen rparen comma eof
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        m = _NUMBER_RE.match(source, i)
        if m:
            tokens.append(_Token("number", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(_Token("ident", m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        if ch in "+-*/^":
            tokens.append(_Token("op", ch, line, col))
        elif ch == "(":
            tokens.append(_Token("lparen", ch, line, col))
        elif ch == ")":
            tokens.append(_Token("rparen", ch, line, col))
        elif ch == ",":
            tokens.append(_Token("comma", ch, line, col))
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
        i += 1
        col += 1
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# recursive-descent parser

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok: _Token | None = None):
        tok = tok or self.peek()
        shown = tok.text if tok.kind != "eof" else "end of input"
        raise ParseError(f"{message} (at {shown!r})", tok.line, tok.col)

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek().kind != "eof":
            self.error("unexpected trailing input")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            try:
                return Const(tok.text)
            except ValueError as exc:
                raise ParseError(str(exc), tok.line, tok.col) from None
        if tok.kind == "ident":
            self.next()
            if self.peek().kind == "lparen":
                self.next()
                args = [self.expr()]
                while self.peek().kind == "comma":
                    self.next()
                    args.append(self.expr())
                if self.peek().kind != "rparen":
                    self.error("expected ')' or ','")
                self.next()
                try:
                    return Call(tok.text, tuple(args))
                except ValueError as exc:
                    raise ParseError(str(exc), tok.line, tok.col) from None
            return Var(tok.text)
        if tok.kind == "lparen":
            self.next()
            e = self.expr()
            if self.peek().kind != "rparen":
                self.error("expected ')'")
            self.next()
            return e
        self.error("expected a number, name or '('")


def parse(source: str) -> Expr:
    """Parse DSL source into an AST.  Raises ParseError with a 1-based
    line/column on any malformed input."""
    return _Parser(_tokenize(source)).parse()


def free_variables(expr: Expr) -> list[str]:
    """Free variable names in order of first appearance."""
    seen: list[str] = []

    def walk(node: Expr):
        if isinstance(node, Var) and node.name not in seen:
            seen.append(node.name)
        for child in node.children():
            walk(child)

    walk(expr)
    return seen


def iter_nodes(expr: Expr) -> Iterator[Expr]:
    yield expr
    for child in expr.children():
        yield from iter_nodes(child)


# ---------------------------------------------------------------------------
# evaluation
#
# The branch structure below is shared by the forward-mode walker in
# ouro.deriv; both must keep producing bit-identical values, so primitive
# formulas live here.

def pow_value(a: float, b: float, node: Expr, inputs: tuple) -> float:
    try:
        r = math.pow(a, b)
    except (ValueError, OverflowError) as exc:
        raise EvalDomainError(node, inputs, f"invalid power ({exc})") from None
    if not math.isfinite(r):
        raise EvalDomainError(node, inputs, "power overflows")
    return r


def min_value(a: float, b: float) -> float:
    return a if a <= b else b


def max_value(a: float, b: float) -> float:
    return a if a >= b else b


def apply_builtin(func: str, vals: tuple[float, ...], node: Expr) -> float:
    if func == "abs":
        return abs(vals[0])
    if func == "floor":
        return float(math.floor(vals[0]))
    if func == "ceil":
        return float(math.ceil(vals[0]))
    if func == "sign":
        v = vals[0]
        return 0.0 if v == 0.0 else (1.0 if v > 0.0 else -1.0)
    if func == "relu":
        v = vals[0]
        return v if v > 0.0 else 0.0
    if func == "exp":
        try:
            return math.exp(vals[0])
        except OverflowError:
            raise EvalDomainError(node, vals, "exp overflows") from None
    if func == "ln":
        if vals[0] <= 0.0:
            raise EvalDomainError(node, vals, "ln of a non-positive number")
        return math.log(vals[0])
    if func == "sqrt":
        if vals[0] < 0.0:
            raise EvalDomainError(node, vals, "sqrt of a negative number")
        return math.sqrt(vals[0])
    if func == "min":
        return min_value(vals[0], vals[1])
    if func == "max":
        return max_value(vals[0], vals[1])
    if func == "clamp":
        v, lo, hi = vals
        return min_value(max_value(v, lo), hi)
    raise AssertionError(func)


def evaluate(expr: Expr, env: Mapping[str, float]) -> float:
    """Evaluate `expr` with variables bound by `env`.

    Every bound value must be finite.  Raises UnboundVariableError for a
    missing variable and EvalDomainError when arithmetic leaves the reals;
    the error names the offending subexpression and its inputs.
    """
    for name, value in env.items():
        if not math.isfinite(value):
            raise EvaluationError(f"non-finite binding {name}={value!r}")
    return _eval(expr, env)


def _eval(node: Expr, env: Mapping[str, float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            r = a + b
        elif node.op == "-":
            r = a - b
        elif node.op == "*":
            r = a * b
        elif node.op == "/":
            if b == 0.0:
                raise EvalDomainError(node, (a, b), "division by zero")
            r = a / b
        else:
            r = pow_value(a, b, node, (a, b))
        if not math.isfinite(r):
            raise EvalDomainError(node, (a, b), "result is not finite")
        return r
    if isinstance(node, Call):
        vals = tuple(_eval(arg, env) for arg in node.args)
        r = apply_builtin(node.func, vals, node)
        if not math.isfinite(r):
            raise EvalDomainError(node, vals, "result is not finite")
        return r
    raise TypeError(f"not an Expr: {node!r}")


# ---------------------------------------------------------------------------
# formatting

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(node: Expr) -> int:
    if isinstance(node, BinOp):
        if node.op in "+-":
            return _LEVEL_ADD
        if node.op in "*/":
            return _LEVEL_MUL
        return _LEVEL_POW
    if isinstance(node, Neg):
        return _LEVEL_NEG
    return _LEVEL_ATOM


def _wrap(node: Expr, floor_level: int) -> str:
    text = format_expr(node)
    if _level(node) < floor_level:
        return f"({text})"
    return text


def format_expr(node: Expr) -> str:
    """Render an AST back to canonical source with minimal parentheses.

    parse(format_expr(e)) is structurally equal to e, and formatting an
    already-canonical string is a fixed point.
    """
    if isinstance(node, Const):
        return node.literal
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _LEVEL_NEG)
    if isinstance(node, BinOp):
        if node.op in "+-":
            return f"{_wrap(node.left, _LEVEL_ADD)} {node.op} {_wrap(node.right, _LEVEL_MUL)}"
        if node.op in "*/":
            return f"{_wrap(node.left, _LEVEL_MUL)} {node.op} {_wrap(node.right, _LEVEL_NEG)}"
        return f"{_wrap(node.left, _LEVEL_ATOM)}^{_wrap(node.right, _LEVEL_NEG)}"
    if isinstance(node, Call):
        args = ", ".join(format_expr(a) for a in node.args)
        return f"{node.func}({args})"
    raise TypeError(f"not an Expr: {node!r}")
