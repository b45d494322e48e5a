"""Bounded LTL over discrete trajectories.

Grammar (ASCII)::

    formula := disj
    disj    := conj (('|' | '||') conj)*
    conj    := until (('&' | '&&') until)*
    until   := unary ('U<=' BOUND unary)?
    unary   := '!' unary | 'F<=' BOUND unary | 'G<=' BOUND unary | primary
    primary := '(' formula ')' | '[' atom ']' | 'true' | 'false'
    atom    := LABEL | NUM ('<=' | '<') IDENT | IDENT ('<=' | '<') NUM

Quantitative atoms always denote strict comparisons: ``[c <= x]`` and
``[c < x]`` both become ``x > c``.  On robust trajectories, which never hit a
property constant exactly, the two readings coincide.

Bounds are step counts, or model-time durations divided by the automaton's
``delta`` when ``parse_bltl`` is given one.

``check`` evaluates all subformulas at every position with numpy window
operations.  The same code runs in three-valued mode on a trace prefix, which
is what makes on-the-fly checking of partially simulated trajectories
possible.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "BltlSyntaxError",
    "TraceTooShortError",
    "Top",
    "Prop",
    "Cmp",
    "Not",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Always",
    "Formula",
    "Trace",
    "parse_bltl",
    "format_bltl",
    "to_nnf",
    "is_nnf",
    "horizon",
    "check",
    "evaluate_prefix",
    "atoms",
    "quantitative_constants",
]


class BltlSyntaxError(ValueError):
    pass


class TraceTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class Top:
    value: bool = True


@dataclass(frozen=True)
class Prop:
    name: str


@dataclass(frozen=True)
class Cmp:
    """``x < c`` when ``less`` else ``x > c``."""

    var: str
    const: float
    less: bool


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    bound: int


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"
    bound: int


@dataclass(frozen=True)
class Always:
    arg: "Formula"
    bound: int


Formula = Union[Top, Prop, Cmp, Not, And, Or, Until, Eventually, Always]


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<temporal>[FGU])\s*<=\s*(?P<bound>[0-9]*\.?[0-9]+(?:[eE][+-]?\d+)?)"
    r"|(?P<atom>\[[^\[\]]*\])"
    r"|(?P<kw>true\b|false\b)"
    r"|(?P<op>&&|\|\||[&|!()]))"
)
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_IDENT = r"[A-Za-z_][A-Za-z0-9_-]*"
_QUANT_LOWER = re.compile(rf"^\s*({_NUM})\s*(<=|<)\s*({_IDENT})\s*$")
_QUANT_UPPER = re.compile(rf"^\s*({_IDENT})\s*(<=|<)\s*({_NUM})\s*$")


def _bound(text: str, delta: float | None, pos: int) -> int:
    value = float(text)
    if delta is not None:
        steps = value / delta
        if abs(steps - round(steps)) > 1e-9 * max(1.0, abs(steps)):
            raise BltlSyntaxError(f"time bound {text} at position {pos} is not a multiple of delta={delta}")
        value = round(steps)
    elif value != int(value):
        raise BltlSyntaxError(f"bound {text} at position {pos} must be an integer step count")
    if value < 1:
        raise BltlSyntaxError(f"bound at position {pos} must be positive")
    return int(value)


def _atom(body: str, pos: int, labels, variables) -> Formula:
    m = _QUANT_LOWER.match(body)
    if m and (variables is None or m.group(3) in variables):
        return Cmp(m.group(3), float(m.group(1)), False)
    m = _QUANT_UPPER.match(body)
    if m and (variables is None or m.group(1) in variables):
        return Cmp(m.group(1), float(m.group(3)), True)
    if _QUANT_LOWER.match(body) or _QUANT_UPPER.match(body):
        raise BltlSyntaxError(f"unknown variable in atom [{body}] at position {pos}")
    name = " ".join(body.split())
    if not name:
        raise BltlSyntaxError(f"empty atom at position {pos}")
    if labels is not None and name not in labels:
        raise BltlSyntaxError(f"unknown label {name!r} at position {pos}")
    return Prop(name)


def parse_bltl(text: str, labels: Iterable[str] | None = None, variables: Iterable[str] | None = None,
               delta: float | None = None) -> Formula:
    """Parse a property.  ``labels`` and ``variables`` (when given) restrict
    the atoms; ``delta`` switches bounds from steps to model time."""
    labels = None if labels is None else set(labels)
    variables = None if variables is None else set(variables)
    tokens = []
    pos = 0
    stripped = text.rstrip()
    while pos < len(stripped):
        m = _TOKEN.match(stripped, pos)
        if not m or m.end() == pos:
            raise BltlSyntaxError(f"unexpected input at position {pos} in {text!r}")
        kind = m.lastgroup if m.lastgroup != "bound" else "temporal"
        if m.group("temporal"):
            tokens.append(("temporal", (m.group("temporal"), _bound(m.group("bound"), delta, m.start())), m.start()))
        elif m.group("atom"):
            tokens.append(("atom", _atom(m.group("atom")[1:-1], m.start(), labels, variables), m.start()))
        elif m.group("kw"):
            tokens.append(("kw", m.group("kw"), m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    if not tokens:
        raise BltlSyntaxError("empty formula")
    tokens.append(("end", None, len(stripped)))
    i = 0

    def peek():
        return tokens[i]

    def take():
        nonlocal i
        tok = tokens[i]
        i += 1
        return tok

    def disj():
        f = conj()
        while peek()[0] == "op" and peek()[1] in ("|", "||"):
            take()
            f = Or(f, conj())
        return f

    def conj():
        f = until()
        while peek()[0] == "op" and peek()[1] in ("&", "&&"):
            take()
            f = And(f, until())
        return f

    def until():
        f = unary()
        tok = peek()
        if tok[0] == "temporal" and tok[1][0] == "U":
            take()
            f = Until(f, until(), tok[1][1])
        return f

    def unary():
        tok = peek()
        if tok[0] == "op" and tok[1] == "!":
            take()
            return Not(unary())
        if tok[0] == "temporal" and tok[1][0] in "FG":
            take()
            arg = unary()
            return Eventually(arg, tok[1][1]) if tok[1][0] == "F" else Always(arg, tok[1][1])
        return primary()

    def primary():
        tok = take()
        if tok[0] == "op" and tok[1] == "(":
            f = disj()
            close = take()
            if close[1] != ")":
                raise BltlSyntaxError(f"expected ')' at position {close[2]} in {text!r}")
            return f
        if tok[0] == "atom":
            return tok[1]
        if tok[0] == "kw":
            return Top(tok[1] == "true")
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        raise BltlSyntaxError(f"unexpected {what} at position {tok[2]} in {text!r}")

    f = disj()
    if peek()[0] != "end":
        raise BltlSyntaxError(f"unexpected input at position {peek()[2]} in {text!r}")
    return f


def _num(x: float) -> str:
    return str(int(x)) if x == int(x) and abs(x) < 1e15 else repr(x)


def format_bltl(f: Formula, delta: float | None = None) -> str:
    """Text form accepted by :func:`parse_bltl` (with the same ``delta``)."""

    def b(k):
        return str(k) if delta is None else _num(round(k * delta, 12))

    def fmt(f, ctx):
        # ctx: 0 top/or operand, 1 and operand, 2 until operand, 3 unary operand
        if isinstance(f, Top):
            return "true" if f.value else "false"
        if isinstance(f, Prop):
            return f"[{f.name}]"
        if isinstance(f, Cmp):
            return f"[{f.var} <= {_num(f.const)}]" if f.less else f"[{_num(f.const)} <= {f.var}]"
        if isinstance(f, Not):
            return "!" + fmt(f.arg, 3)
        if isinstance(f, Eventually):
            return f"F<={b(f.bound)}" + fmt(f.arg, 3)
        if isinstance(f, Always):
            return f"G<={b(f.bound)}" + fmt(f.arg, 3)
        if isinstance(f, Until):
            s = f"{fmt(f.left, 3)} U<={b(f.bound)} {fmt(f.right, 2)}"
            return f"({s})" if ctx > 2 else s
        if isinstance(f, And):
            s = f"{fmt(f.left, 1)} & {fmt(f.right, 2)}"
            return f"({s})" if ctx > 1 else s
        if isinstance(f, Or):
            s = f"{fmt(f.left, 0)} | {fmt(f.right, 1)}"
            return f"({s})" if ctx > 0 else s
        raise TypeError(f"not a formula: {f!r}")

    return fmt(f, 0)


# --------------------------------------------------------------------------
# normal form and horizon


def to_nnf(f: Formula) -> Formula:
    """Push negations down to atoms."""
    if isinstance(f, (Top, Prop, Cmp)):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Until):
        return Until(to_nnf(f.left), to_nnf(f.right), f.bound)
    if isinstance(f, Eventually):
        return Eventually(to_nnf(f.arg), f.bound)
    if isinstance(f, Always):
        return Always(to_nnf(f.arg), f.bound)
    g = f.arg
    if isinstance(g, Top):
        return Top(not g.value)
    if isinstance(g, (Prop, Cmp)):
        return f
    if isinstance(g, Not):
        return to_nnf(g.arg)
    if isinstance(g, And):
        return Or(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
    if isinstance(g, Or):
        return And(to_nnf(Not(g.left)), to_nnf(Not(g.right)))
    if isinstance(g, Eventually):
        return Always(to_nnf(Not(g.arg)), g.bound)
    if isinstance(g, Always):
        return Eventually(to_nnf(Not(g.arg)), g.bound)
    if isinstance(g, Until):
        na, nb = to_nnf(Not(g.left)), to_nnf(Not(g.right))
        return Or(Always(nb, g.bound), Until(nb, And(na, nb), g.bound))
    raise TypeError(f"not a formula: {f!r}")


def is_nnf(f: Formula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.arg, (Prop, Cmp))
    if isinstance(f, (And, Or, Until)):
        return is_nnf(f.left) and is_nnf(f.right)
    if isinstance(f, (Eventually, Always)):
        return is_nnf(f.arg)
    return True


def horizon(f: Formula) -> int:
    """Largest sum of bounds along a root-to-leaf path."""
    if isinstance(f, (Top, Prop, Cmp)):
        return 0
    if isinstance(f, Not):
        return horizon(f.arg)
    if isinstance(f, (And, Or)):
        return max(horizon(f.left), horizon(f.right))
    if isinstance(f, Until):
        return f.bound + max(horizon(f.left), horizon(f.right))
    return f.bound + horizon(f.arg)


def atoms(f: Formula) -> set:
    if isinstance(f, (Prop, Cmp)):
        return {f}
    if isinstance(f, Top):
        return set()
    if isinstance(f, Not):
        return atoms(f.arg)
    if isinstance(f, (And, Or, Until)):
        return atoms(f.left) | atoms(f.right)
    return atoms(f.arg)


def quantitative_constants(f: Formula) -> set[tuple[str, float]]:
    """The constant sets ``C_i`` as (variable, constant) pairs."""
    return {(a.var, a.const) for a in atoms(f) if isinstance(a, Cmp)}


# --------------------------------------------------------------------------
# traces and checking


@dataclass
class Trace:
    """Discrete trace: mode index per position, labels per mode and the value
    states.  ``Trace.from_labels`` builds one directly from label sets."""

    modes: np.ndarray
    mode_labels: Sequence[frozenset]
    values: np.ndarray
    variables: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.modes)

    @classmethod
    def from_labels(cls, labels: Sequence[Iterable[str]], values=None, variables: Sequence[str] = ()):
        sets = [frozenset(s) for s in labels]
        uniq = sorted(set(sets), key=lambda s: sorted(s))
        index = {s: i for i, s in enumerate(uniq)}
        modes = np.array([index[s] for s in sets], dtype=np.int64)
        if values is None:
            values = np.zeros((len(sets), len(variables)))
        return cls(modes, tuple(uniq), np.asarray(values, dtype=np.float64), tuple(variables))

    @classmethod
    def from_trajectory(cls, traj, h, length: int | None = None):
        k = len(traj.modes) if length is None else length
        return cls(np.asarray(traj.modes[:k]), tuple(m.labels for m in h.modes), np.asarray(traj.states[:k]),
                   tuple(h.variables))

    def labels_at(self, i: int) -> frozenset:
        return self.mode_labels[self.modes[i]]


_NONE = np.int64(2) ** 62


def _next_true(mask: np.ndarray) -> np.ndarray:
    """Index of the first True at or after each position (a huge sentinel if
    there is none among the known positions)."""
    P = mask.shape[0]
    idx = np.where(mask, np.arange(P), _NONE)
    return np.minimum.accumulate(idx[::-1])[::-1]


def _eval3(f: Formula, tr: Trace, P: int, E: int):
    """(surely true, surely false) at positions ``0..P-1`` given that only the
    first ``P`` positions are known and the full trace ends at index ``E``."""
    if isinstance(f, Top):
        t = np.full(P, f.value)
        return t, ~t
    if isinstance(f, Prop):
        has = np.array([f.name in s for s in tr.mode_labels], dtype=bool)
        t = has[tr.modes[:P]] if has.size else np.zeros(P, dtype=bool)
        return t, ~t
    if isinstance(f, Cmp):
        try:
            col = tr.values[:P, tr.variables.index(f.var)]
        except ValueError:
            raise KeyError(f"trace has no variable {f.var!r}") from None
        t = col < f.const if f.less else col > f.const
        return t, ~t
    if isinstance(f, Not):
        t, fa = _eval3(f.arg, tr, P, E)
        return fa, t
    if isinstance(f, And):
        lt, lf = _eval3(f.left, tr, P, E)
        rt, rf = _eval3(f.right, tr, P, E)
        return lt & rt, lf | rf
    if isinstance(f, Or):
        lt, lf = _eval3(f.left, tr, P, E)
        rt, rf = _eval3(f.right, tr, P, E)
        return lt | rt, lf & rf
    pos = np.arange(P)
    end = np.minimum(pos + f.bound, E)
    known = end <= P - 1
    if isinstance(f, Eventually):
        t, fa = _eval3(f.arg, tr, P, E)
        return _next_true(t) <= end, known & (_next_true(~fa) > end)
    if isinstance(f, Always):
        t, fa = _eval3(f.arg, tr, P, E)
        return known & (_next_true(~t) > end), _next_true(fa) <= end
    if isinstance(f, Until):
        at, af = _eval3(f.left, tr, P, E)
        bt, bf = _eval3(f.right, tr, P, E)
        n2 = _next_true(bt)
        sure = (n2 <= end) & (n2 <= _next_true(~at))
        last = np.minimum(_next_true(af), end)
        fails = (last <= P - 1) & (_next_true(~bf) > last)
        return sure, fails
    raise TypeError(f"not a formula: {f!r}")


def evaluate_prefix(f: Formula, tr: Trace, total_length: int, j: int = 0) -> bool | None:
    """Verdict at position ``j`` when only ``len(tr)`` of ``total_length``
    positions are known; ``None`` if the prefix does not decide it."""
    P = len(tr)
    if not 0 <= j < P:
        raise IndexError("position outside the known prefix")
    t, fa = _eval3(f, tr, P, total_length - 1)
    if t[j]:
        return True
    if fa[j]:
        return False
    return None


def check(f: Formula, tr: Trace, j: int = 0) -> bool:
    """Does the trace satisfy ``f`` at position ``j``?"""
    L = len(tr)
    if not 0 <= j < L:
        raise IndexError("position outside the trace")
    if L < j + horizon(f) + 1:
        raise TraceTooShortError(f"trace of length {L} is too short for horizon {horizon(f)} at position {j}")
    t, fa = _eval3(f, tr, L, L - 1)
    assert t[j] != fa[j]
    return bool(t[j])
