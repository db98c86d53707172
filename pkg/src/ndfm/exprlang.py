"""Tiny arithmetic expression language for coefficient and boundary fields.

Scenario files stay declarative by writing permeabilities, apertures,
sources and boundary values as strings such as ``"1-x"`` or
``"sin(0.3)*y"``.  The grammar, lowest to highest binding:

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?        # right associative, above unary minus
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Recognized variables are ``x``, ``y`` (coordinates) and ``s`` (arc length
along a fracture).  Functions: sin, cos, exp, abs, sqrt and the two-argument
min, max.  Evaluation follows IEEE double precision and works elementwise
on numpy arrays; division by zero and roots/powers of negative numbers
raise ``ExprEvalError`` instead of producing NaNs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "y", "s")
FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1, "min": 2, "max": 2}


class ExprSyntaxError(ValueError):
    """Malformed expression text; ``offset`` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprEvalError(ValueError):
    """Runtime failure: unbound variable or arithmetic domain error."""


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Num | Var | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(
                        f"unknown function {val!r}; allowed: {', '.join(sorted(FUNCTIONS))}", off
                    )
                self.advance()
                args = [self.expr()]
                while True:
                    k2, v2, o2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.advance()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", off
                    )
                return Call(val, tuple(args))
            if val not in VARIABLES:
                raise ExprSyntaxError(
                    f"unknown identifier {val!r}; allowed: {', '.join(VARIABLES)}", off
                )
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError(f"expected a value, got {val!r}" if val else "unexpected end of input", off)


def parse_expr(text: str) -> Expr:
    """Parse expression text into an AST.

    Raises ExprSyntaxError (with byte offset) on malformed input or
    identifiers outside the allowed variable/function set.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation

def _check(cond, message):
    if not cond:
        raise ExprEvalError(message)


def eval_expr(e: Expr, bindings: dict):
    """Evaluate an AST with the given variable bindings.

    Values may be scalars or numpy arrays (broadcasting elementwise).
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -eval_expr(e.arg, bindings)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, bindings)
        b = eval_expr(e.right, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            _check(np.all(np.asarray(b) != 0), "division by zero")
            return a / b
        if e.op == "^":
            aa = np.asarray(a, dtype=float)
            bb = np.asarray(b, dtype=float)
            _check(
                not np.any((aa < 0) & (bb != np.floor(bb))),
                "negative base with non-integer exponent",
            )
            _check(not np.any((aa == 0) & (bb < 0)), "zero raised to a negative power")
            out = np.power(aa, bb)
            return float(out) if out.ndim == 0 else out
        raise ExprEvalError(f"unknown operator {e.op!r}")
    if isinstance(e, Call):
        args = [eval_expr(a, bindings) for a in e.args]
        if e.func == "sin":
            return np.sin(args[0])
        if e.func == "cos":
            return np.cos(args[0])
        if e.func == "exp":
            return np.exp(args[0])
        if e.func == "abs":
            return np.abs(args[0])
        if e.func == "sqrt":
            _check(np.all(np.asarray(args[0]) >= 0), "square root of a negative number")
            return np.sqrt(args[0])
        if e.func == "min":
            return np.minimum(args[0], args[1])
        if e.func == "max":
            return np.maximum(args[0], args[1])
        raise ExprEvalError(f"unknown function {e.func!r}")
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expr) -> set:
    """Set of variable names the expression reads."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    return set()


def is_constant(e: Expr) -> bool:
    return not free_vars(e)


# ---------------------------------------------------------------------------
# Printing.  Levels: 1 add, 2 mul, 3 unary minus, 4 power, 5 atom.  A child
# is parenthesized when its level is below what its position requires, so
# parse(expr_to_text(t)) reproduces t node for node.

def _level(e):
    if isinstance(e, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[e.op]
    if isinstance(e, Neg):
        return 3
    return 5


def _fmt(e, need):
    lvl = _level(e)
    if isinstance(e, Num):
        text = repr(e.value)
    elif isinstance(e, Var):
        text = e.name
    elif isinstance(e, Neg):
        text = "-" + _fmt(e.arg, 3)
    elif isinstance(e, Call):
        text = f"{e.func}({', '.join(_fmt(a, 1) for a in e.args)})"
    elif isinstance(e, BinOp):
        if e.op == "^":
            text = _fmt(e.left, 5) + "^" + _fmt(e.right, 3)
        else:
            # left associative: right operand must bind strictly tighter
            text = _fmt(e.left, lvl) + e.op + _fmt(e.right, lvl + 1)
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if lvl < need:
        return "(" + text + ")"
    return text


def expr_to_text(e: Expr) -> str:
    """Render an AST back to parseable text (parse round-trips exactly)."""
    return _fmt(e, 1)


def compile_expr(e: Expr, varnames):
    """Wrap an AST as a positional-argument callable, e.g. f(x, y)."""
    names = tuple(varnames)

    def fn(*values):
        return eval_expr(e, dict(zip(names, values)))

    return fn
