"""Closed-form automata shared by the oracle, sampler and acceptance tests."""

import math

from hybridsmc import bltl as B
from hybridsmc.oracle import AnalyticMode, AnalyticSystem

INF = math.inf
EPS = 1e-6  # init box width; makes the point-mass time sets a valid stand-in


def _stop(name):
    return AnalyticMode(name, ("const",), (0.0,), frozenset({name}))


def two_guard(split: float) -> AnalyticSystem:
    """dx/dt = 1 from x near 0; guard to L on (0, split), to R on (split, 1).
    Exact probabilities (split, 1 - split)."""
    return AnalyticSystem(
        variables=("x",),
        modes=(AnalyticMode("S", ("const",), (1.0,), frozenset({"S"})), _stop("L"), _stop("R")),
        transitions=(("S", "L", ((0.0, split),)), ("S", "R", ((split, 2.0),))),
        initial_mode="S",
        init=((0.0, EPS),),
    )


SYMMETRIC = two_guard(0.5)
ASYMMETRIC = two_guard(0.25)

# partly overlapping guards, a linear mode and states with no guard enabled
CHAIN = AnalyticSystem(
    variables=("x", "y"),
    modes=(
        AnalyticMode("A", ("const", "const"), (1.0, 0.5), frozenset({"A"})),
        AnalyticMode("B", ("const", "linear"), (-1.0, -0.7), frozenset({"B"})),
        AnalyticMode("C", ("linear", "const"), (-1.2, 1.0), frozenset({"C"})),
    ),
    transitions=(
        ("A", "B", ((0.2, 1.2), (-INF, INF))),
        ("A", "C", ((0.6, 2.0), (0.0, 1.4))),
        ("B", "A", ((-INF, 0.4), (-INF, INF))),
        ("B", "C", ((0.1, 0.9), (0.3, INF))),
        ("C", "A", ((-INF, 0.5), (-INF, INF))),
        ("C", "B", ((0.3, 3.0), (1.0, INF))),
    ),
    initial_mode="A",
    init=((0.0, 0.2), (0.0, 0.2)),
    horizon=3,
)


# --------------------------------------------------------------------------
# random BLTL corpus

PROPS = ("A", "B")
THRESHOLDS = (-0.5, 0.0, 0.5)


def random_formula(rng, depth):
    """Formula of nesting depth at most ``depth`` with bounds 1..3."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.6:
            return B.Prop(PROPS[rng.integers(2)])
        if r < 0.9:
            return B.Cmp("x", float(THRESHOLDS[rng.integers(3)]), bool(rng.integers(2)))
        return B.Top(bool(rng.integers(2)))
    op = rng.integers(7)
    sub = lambda: random_formula(rng, depth - 1)  # noqa: E731
    k = int(rng.integers(1, 4))
    if op == 0:
        return B.Not(sub())
    if op == 1:
        return B.And(sub(), sub())
    if op == 2:
        return B.Or(sub(), sub())
    if op == 3:
        return B.Until(sub(), sub(), k)
    if op == 4:
        return B.Eventually(sub(), k)
    if op == 5:
        return B.Always(sub(), k)
    return B.Not(B.Until(sub(), sub(), k))


def random_trace(rng, length):
    labels = [{p for p in PROPS if rng.random() < 0.5} for _ in range(length)]
    # values on a coarse grid so atoms also meet their thresholds exactly
    values = rng.integers(-3, 4, size=(length, 1)) / 4.0
    return B.Trace.from_labels(labels, values, ("x",))


def random_pair(rng, max_depth=3, max_length=8):
    while True:
        f = random_formula(rng, max_depth)
        if B.horizon(f) <= max_length - 1:
            length = int(rng.integers(B.horizon(f) + 1, max_length + 1))
            return f, random_trace(rng, length)
