"""Closed-form reference computations used to validate the sampler and the
BLTL checker.

``AnalyticSystem`` covers 1-D and 2-D automata whose modes have constant
(``dx/dt = a``) or linear (``dx/dt = a*x``) fields and whose guards are boxes.
Flows are monotone in each coordinate, so the set of times in (0, 1) at which
a guard holds is obtained by inverting the flow exactly.

``brute_force_bltl`` is a deliberately naive recursive evaluator, kept
independent of :mod:`hybridsmc.bltl`'s array-based checker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import bltl as B
from .model import GuardAnd, GuardAtom, HybridAutomaton, InitBox, Mode, Transition
from .expr import Binary, Const, Sym, VAR

__all__ = [
    "AnalyticMode",
    "AnalyticSystem",
    "exact_time_set",
    "interval_measure",
    "exact_transition_probs",
    "chain_reachability",
    "brute_force_bltl",
]

Interval = tuple[float, float]


@dataclass(frozen=True)
class AnalyticMode:
    """Per-coordinate field: kind ``"const"`` gives ``dx/dt = a``, kind
    ``"linear"`` gives ``dx/dt = a*x``."""

    name: str
    kinds: tuple[str, ...]
    rates: tuple[float, ...]
    labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class AnalyticSystem:
    variables: tuple[str, ...]
    modes: tuple[AnalyticMode, ...]
    # (source, target, box) with box = ((lo, hi), ...) per coordinate, open
    transitions: tuple[tuple[str, str, tuple[Interval, ...]], ...]
    initial_mode: str
    init: tuple[Interval, ...]
    horizon: int = 10

    def mode(self, name: str) -> AnalyticMode:
        return next(m for m in self.modes if m.name == name)

    def outgoing(self, mode: str) -> list[tuple[int, tuple]]:
        return [(i, t) for i, t in enumerate(self.transitions) if t[0] == mode]

    def flow(self, mode: str, t: float, v: Sequence[float]) -> tuple[float, ...]:
        m = self.mode(mode)
        out = []
        for kind, a, x in zip(m.kinds, m.rates, v):
            out.append(x + a * t if kind == "const" else x * math.exp(a * t))
        return tuple(out)

    def automaton(self, delta: float = 1.0) -> HybridAutomaton:
        """The same system as a :class:`HybridAutomaton` for the sampler."""
        modes = []
        for m in self.modes:
            rhs = []
            for kind, a, var in zip(m.kinds, m.rates, self.variables):
                rhs.append(Const(a) if kind == "const" else Binary("*", Const(a), Sym(var, VAR)))
            modes.append(Mode(m.name, tuple(rhs), m.labels))
        transitions = []
        for src, dst, box in self.transitions:
            g = None
            for i, (lo, hi) in enumerate(box):
                for atom in ([GuardAtom(i, lo, True)] if math.isfinite(lo) else []) + (
                        [GuardAtom(i, hi, False)] if math.isfinite(hi) else []):
                    g = atom if g is None else GuardAnd(g, atom)
            if g is None:
                raise ValueError("guard boxes must bound at least one coordinate")
            transitions.append(Transition(src, dst, g))
        return HybridAutomaton(
            name="analytic",
            variables=self.variables,
            parameters=(),
            definitions=(),
            inputs=(),
            modes=tuple(modes),
            initial_mode=self.initial_mode,
            transitions=tuple(transitions),
            init=InitBox(tuple(lo for lo, _ in self.init), tuple(hi for _, hi in self.init)),
            delta=delta,
            horizon=self.horizon,
        )


# --------------------------------------------------------------------------
# time sets


def _above(kind: str, a: float, v: float, c: float) -> Interval:
    """{t in R : x(t) > c} for one monotone coordinate, as an open interval."""
    inf = math.inf
    if kind == "const":
        if a == 0.0:
            return (-inf, inf) if v > c else (inf, inf)
        t0 = (c - v) / a
        return (t0, inf) if a > 0 else (-inf, t0)
    if a == 0.0 or v == 0.0:
        return (-inf, inf) if v > c else (inf, inf)
    if v > 0:
        if c <= 0:
            return (-inf, inf)
        t0 = math.log(c / v) / a
        return (t0, inf) if a > 0 else (-inf, t0)
    # v < 0: x(t) stays negative
    if c >= 0:
        return (inf, inf)
    t0 = math.log(c / v) / a
    return (-inf, t0) if a > 0 else (t0, inf)


def _below(kind: str, a: float, v: float, c: float) -> Interval:
    # x < c  iff  -x > -c, and -x has the same kind with negated start (and
    # negated rate for the constant field)
    if kind == "const":
        return _above(kind, -a, -v, -c)
    return _above(kind, a, -v, -c)


def _intersect(a: Interval, b: Interval) -> Interval:
    return (max(a[0], b[0]), min(a[1], b[1]))


def exact_time_set(sys: AnalyticSystem, mode: str, guard_index: int, v: Sequence[float]) -> list[Interval]:
    """Times in (0, 1) at which transition ``guard_index`` is enabled along the
    flow of ``mode`` from ``v``; empty list or a single open interval."""
    m = sys.mode(mode)
    _, _, box = sys.transitions[guard_index]
    iv = (0.0, 1.0)
    for kind, a, x, (lo, hi) in zip(m.kinds, m.rates, v, box):
        if math.isfinite(lo):
            iv = _intersect(iv, _above(kind, a, x, lo))
        if math.isfinite(hi):
            iv = _intersect(iv, _below(kind, a, x, hi))
    return [iv] if iv[0] < iv[1] else []


def interval_measure(ivs: Sequence[Interval]) -> float:
    return sum(b - a for a, b in ivs)


def exact_transition_probs(sys: AnalyticSystem, mode: str, v: Sequence[float]) -> dict:
    """Probability of each outgoing transition (by index) from the point ``v``;
    ``{None: 1.0}`` when no guard is ever enabled in the unit interval."""
    meas = {i: interval_measure(exact_time_set(sys, mode, i, v)) for i, _ in sys.outgoing(mode)}
    total = sum(meas.values())
    if total <= 0.0:
        return {None: 1.0}
    return {i: m / total for i, m in meas.items()}


# --------------------------------------------------------------------------
# path distribution

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _quad_points(a: float, b: float, panels: int):
    """Composite Gauss-Legendre nodes and weights on (a, b)."""
    edges = np.linspace(a, b, panels + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        for x, w in zip(_GL_NODES, _GL_WEIGHTS):
            yield mid + half * x, half * w


def _paths_from(sys, mode, v, depth, panels, out, prefix, weight):
    if depth == 0:
        out[prefix] = out.get(prefix, 0.0) + weight
        return
    sets = {i: exact_time_set(sys, mode, i, v) for i, _ in sys.outgoing(mode)}
    total = sum(interval_measure(s) for s in sets.values())
    if total <= 0.0:
        _paths_from(sys, mode, sys.flow(mode, 1.0, v), depth - 1, panels, out, prefix + (mode,), weight)
        return
    for i, ivs in sets.items():
        target = sys.transitions[i][1]
        if depth == 1:
            # the final state is not needed, only the probability of the target
            p = interval_measure(ivs) / total
            if p > 0:
                out[prefix + (target,)] = out.get(prefix + (target,), 0.0) + weight * p
            continue
        for a, b in ivs:
            # switch time uniform on T_i, guard picked with prob |T_i| / total:
            # density 1 / total on T_i
            for t, w in _quad_points(a, b, panels):
                v_next = sys.flow(target, 1.0 - t, sys.flow(mode, t, v))
                _paths_from(sys, target, v_next, depth - 1, panels, out, prefix + (target,), weight * w / total)


def chain_reachability(sys: AnalyticSystem, depth: int, panels: int = 8, init_nodes: int = 2) -> dict:
    """Probability of every mode sequence of ``depth`` steps (``depth + 1``
    modes) of the Markov chain, by nested quadrature over switch times and
    over the initial box."""
    if not 1 <= depth <= 4:
        raise ValueError("depth must be between 1 and 4")
    out: dict = {}
    gx, gw = np.polynomial.legendre.leggauss(init_nodes)
    grids = []
    for lo, hi in sys.init:
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        grids.append([(mid + half * x, 0.5 * w) for x, w in zip(gx, gw)])
    for combo in np.ndindex(*(init_nodes,) * len(sys.init)):
        v = tuple(grids[d][c][0] for d, c in enumerate(combo))
        w = math.prod(grids[d][c][1] for d, c in enumerate(combo))
        _paths_from(sys, sys.initial_mode, v, depth, panels, out, (sys.initial_mode,), w)
    return out


# --------------------------------------------------------------------------
# brute-force BLTL


def brute_force_bltl(f: B.Formula, trace: B.Trace, j: int = 0) -> bool:
    """Literal recursive semantics; ``F`` and ``G`` are unfolded through their
    definitions ``F φ = true U φ`` and ``G φ = ¬F¬φ``."""
    last = len(trace) - 1
    if isinstance(f, B.Top):
        return f.value
    if isinstance(f, B.Prop):
        return f.name in trace.labels_at(j)
    if isinstance(f, B.Cmp):
        x = float(trace.values[j][list(trace.variables).index(f.var)])
        return x < f.const if f.less else x > f.const
    if isinstance(f, B.Not):
        return not brute_force_bltl(f.arg, trace, j)
    if isinstance(f, B.And):
        return brute_force_bltl(f.left, trace, j) and brute_force_bltl(f.right, trace, j)
    if isinstance(f, B.Or):
        return brute_force_bltl(f.left, trace, j) or brute_force_bltl(f.right, trace, j)
    if isinstance(f, B.Eventually):
        return brute_force_bltl(B.Until(B.Top(True), f.arg, f.bound), trace, j)
    if isinstance(f, B.Always):
        return not brute_force_bltl(B.Eventually(B.Not(f.arg), f.bound), trace, j)
    if isinstance(f, B.Until):
        for jp in range(f.bound + 1):
            if j + jp > last:
                break
            if brute_force_bltl(f.right, trace, j + jp) and all(
                    brute_force_bltl(f.left, trace, j + jpp) for jpp in range(jp)):
                return True
        return False
    raise TypeError(f"not a formula: {f!r}")
