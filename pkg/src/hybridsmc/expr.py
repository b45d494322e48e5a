"""Real-valued expression language for ODE right-hand sides.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := power (('*' | '/') power)*
    power   := unary ('^' power)?          # right associative
    unary   := '-' unary | '+' unary | primary
    primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Unary minus binds tighter than ``^``, so ``-x^2`` is ``(-x)^2``.

Functions: ``exp ln tanh sqrt abs`` (one argument), ``min max pow`` (two)
and ``select(c, a, b)`` which yields ``a`` when ``c >= 0`` and ``b``
otherwise.  ``select`` is not C1 and model validation warns about it.

Identifiers match ``[A-Za-z_][A-Za-z0-9_-]*``.  A hyphenated name is only
taken whole when it is declared; otherwise the scanner backs off to the
longest declared prefix, so ``u-u_s`` reads as ``u - u_s`` while
``PER-CRY`` stays one symbol if the model declares it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

__all__ = [
    "Const",
    "Sym",
    "Unary",
    "Binary",
    "Select",
    "Expr",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "parse_expr",
    "eval_expr",
    "free_symbols",
    "format_expr",
    "contains_select",
    "UNARY_FUNCS",
    "BINARY_FUNCS",
]

UNARY_FUNCS = ("exp", "ln", "tanh", "sqrt", "abs")
BINARY_FUNCS = ("min", "max", "pow")
_RESERVED = set(UNARY_FUNCS) | set(BINARY_FUNCS) | {"select"}

# symbol kinds
VAR, PARAM, INPUT, DEF, CONST = "var", "param", "input", "def", "const"


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str
    kind: str = VAR


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or one of UNARY_FUNCS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # '+', '-', '*', '/', 'pow', 'min', 'max'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Select:
    cond: "Expr"
    if_nonneg: "Expr"
    if_neg: "Expr"


Expr = Union[Const, Sym, Unary, Binary, Select]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, pos: int | None = None):
        where = "" if pos is None else f" at position {pos}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name


class ExprDomainError(ArithmeticError):
    """Raised when evaluation leaves the real domain (division by zero, ln of
    a non-positive number, overflow)."""

    def __init__(self, message: str, node: Expr):
        super().__init__(f"{message} in {format_expr(node)}")
        self.node = node


# --------------------------------------------------------------------------
# scanning

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")


def _scan_ident(text: str, pos: int, symbols: Mapping[str, str]) -> str:
    m = _IDENT.match(text, pos)
    word = m.group(0).rstrip("-")
    if word in symbols or "-" not in word:
        return word
    pieces = word.split("-")
    for k in range(len(pieces) - 1, 0, -1):
        cand = "-".join(pieces[:k])
        if cand in symbols or cand in _RESERVED:
            return cand
    return pieces[0]


def _tokenize(text: str, symbols: Mapping[str, str]):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            m = _NUMBER.match(text, pos)
            tokens.append(("num", m.group(0), pos))
            pos = m.end()
            continue
        if ch.isalpha() or ch == "_":
            word = _scan_ident(text, pos, symbols)
            tokens.append(("id", word, pos))
            pos += len(word)
            continue
        if text.startswith("**", pos):
            tokens.append(("op", "^", pos))
            pos += 2
            continue
        if ch in "+-*/^(),":
            tokens.append(("op", ch, pos))
            pos += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", text, pos)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, symbols: Mapping[str, str]):
        self.text = text
        self.symbols = symbols
        self.tokens = _tokenize(text, symbols)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", self.text, pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.power()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            left = Binary(op, left, self.power())
        return left

    def power(self) -> Expr:
        base = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Binary("pow", base, self.power())
        return base

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.primary()

    def primary(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "id":
            if self.peek()[:2] == ("op", "("):
                return self.call(val, pos)
            if val in _RESERVED:
                raise ExprSyntaxError(f"function {val!r} needs arguments", self.text, pos)
            if val not in self.symbols:
                raise UnknownIdentifierError(val, pos)
            return Sym(val, self.symbols[val])
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", self.text, pos)

    def call(self, name: str, pos: int) -> Expr:
        if name not in _RESERVED:
            raise UnknownIdentifierError(name, pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[:2] == ("op", ","):
            self.take()
            args.append(self.expr())
        self.expect(")")
        arity = 1 if name in UNARY_FUNCS else 3 if name == "select" else 2
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{name} takes {arity} argument(s), got {len(args)}", self.text, pos
            )
        if name in UNARY_FUNCS:
            return Unary(name, args[0])
        if name == "select":
            return Select(*args)
        return Binary(name, args[0], args[1])


def parse_expr(text: str, symbols: Mapping[str, str] | None = None) -> Expr:
    """Parse ``text`` against a symbol table mapping names to kinds
    (``var``, ``param``, ``input``, ``def`` or ``const``)."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", text or "", 0)
    return _Parser(text, symbols or {}).parse()


# --------------------------------------------------------------------------
# evaluation


def eval_expr(e: Expr, env: Mapping[str, float]) -> float:
    value = _eval(e, env)
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", e)
    return value


def _eval(e: Expr, env: Mapping[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sym):
        try:
            return float(env[e.name])
        except KeyError:
            raise UnknownIdentifierError(e.name) from None
    if isinstance(e, Unary):
        a = _eval(e.arg, env)
        op = e.op
        if op == "neg":
            return -a
        if op == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                raise ExprDomainError("overflow", e) from None
        if op == "ln":
            if a <= 0.0:
                raise ExprDomainError(f"ln of non-positive value {a!r}", e)
            return math.log(a)
        if op == "tanh":
            return math.tanh(a)
        if op == "sqrt":
            if a < 0.0:
                raise ExprDomainError(f"sqrt of negative value {a!r}", e)
            return math.sqrt(a)
        if op == "abs":
            return abs(a)
        raise ValueError(f"unknown unary operator {op!r}")
    if isinstance(e, Binary):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        op = e.op
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", e)
            r = a / b
        elif op == "pow":
            try:
                r = math.pow(a, b)
            except (ValueError, ZeroDivisionError):
                raise ExprDomainError(f"pow({a!r}, {b!r}) undefined", e) from None
            except OverflowError:
                raise ExprDomainError("overflow", e) from None
        elif op == "min":
            r = min(a, b)
        elif op == "max":
            r = max(a, b)
        else:
            raise ValueError(f"unknown binary operator {op!r}")
        if not math.isfinite(r):
            raise ExprDomainError("overflow", e)
        return r
    if isinstance(e, Select):
        c = _eval(e.cond, env)
        return _eval(e.if_nonneg if c >= 0.0 else e.if_neg, env)
    raise TypeError(f"not an expression: {e!r}")


def free_symbols(e: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Sym):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Select):
            stack.extend((node.cond, node.if_nonneg, node.if_neg))
    return frozenset(out)


def contains_select(e: Expr) -> bool:
    if isinstance(e, Select):
        return True
    if isinstance(e, Unary):
        return contains_select(e.arg)
    if isinstance(e, Binary):
        return contains_select(e.left) or contains_select(e.right)
    return False


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "pow": 3}


def _fmt_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_expr(e: Expr) -> str:
    """Canonical text form; ``parse_expr(format_expr(e)) == e`` for trees
    whose constants are non-negative (the only ones the parser produces)."""
    return _fmt(e)[0]


def _fmt(e: Expr) -> tuple[str, int]:
    # returns (text, precedence); 5 = atomic, 4 = unary minus
    if isinstance(e, Const):
        if e.value < 0 or math.copysign(1.0, e.value) < 0:
            return f"(-{_fmt_number(-e.value)})", 5
        return _fmt_number(e.value), 5
    if isinstance(e, Sym):
        return e.name, 5
    if isinstance(e, Unary):
        if e.op == "neg":
            s, p = _fmt(e.arg)
            if p < 4:
                s = f"({s})"
            return f"-{s}", 4
        return f"{e.op}({_fmt(e.arg)[0]})", 5
    if isinstance(e, Select):
        parts = ", ".join(_fmt(x)[0] for x in (e.cond, e.if_nonneg, e.if_neg))
        return f"select({parts})", 5
    if isinstance(e, Binary):
        if e.op in ("min", "max"):
            return f"{e.op}({_fmt(e.left)[0]}, {_fmt(e.right)[0]})", 5
        prec = _PREC[e.op]
        ls, lp = _fmt(e.left)
        rs, rp = _fmt(e.right)
        if e.op == "pow":
            # right associative: a^(b^c) prints bare, (a^b)^c needs parens
            if lp <= prec:
                ls = f"({ls})"
            if rp < prec:
                rs = f"({rs})"
            return f"{ls}^{rs}", prec
        if lp < prec:
            ls = f"({ls})"
        if rp <= prec:
            rs = f"({rs})"
        return f"{ls} {e.op} {rs}", prec
    raise TypeError(f"not an expression: {e!r}")
