"""Hybrid automata: modes with ODE right-hand sides, guarded transitions, an
open initial box and piecewise-constant input signals.

Model documents are YAML with the sections below; see ``docs/model-format.md``
for the full reference::

    name: toy
    variables: [x]
    parameters: {k: 1.0}
    definitions: {}            # optional named sub-expressions
    inputs:
      eps: {schedule: [[0, 1], [1, 0]]}
    modes:
      q0: {labels: [Start], ode: {x: "k"}}
      q1: {ode: {x: "0"}}
    initial_mode: q0
    transitions:
      - {from: q0, to: q1, guard: "0 < x && x < 2"}
    init: {distribution: uniform, box: {x: [0, 0.1]}}
    delta: 1
    horizon: 10
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import yaml

from .expr import (
    CONST,
    DEF,
    INPUT,
    PARAM,
    VAR,
    Expr,
    contains_select,
    format_expr,
    free_symbols,
    parse_expr,
)

__all__ = [
    "ModelError",
    "GuardAtom",
    "GuardAnd",
    "GuardOr",
    "Guard",
    "InitBox",
    "InputSignal",
    "Mode",
    "Transition",
    "HybridAutomaton",
    "parse_guard",
    "format_guard",
    "guard_sat",
    "guard_boxes",
    "guard_constants",
    "input_value",
    "parse_model",
    "model_from_dict",
    "model_to_dict",
    "serialize_model",
]

FORMAT_TAG = "hybrid-automaton/1"


class ModelError(ValueError):
    pass


# --------------------------------------------------------------------------
# guards


@dataclass(frozen=True)
class GuardAtom:
    """``bound < x[var]`` when ``lower`` else ``x[var] < bound``."""

    var: int
    bound: float
    lower: bool


@dataclass(frozen=True)
class GuardAnd:
    left: "Guard"
    right: "Guard"


@dataclass(frozen=True)
class GuardOr:
    left: "Guard"
    right: "Guard"


Guard = Union[GuardAtom, GuardAnd, GuardOr]

_GUARD_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_-]*)|(?P<op>&&|\|\||<|\(|\)))"
)


def parse_guard(text: str, variables: Sequence[str]) -> Guard:
    index = {name: i for i, name in enumerate(variables)}
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _GUARD_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ModelError(f"bad guard syntax at position {pos} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    i = 0

    def peek():
        return tokens[i]

    def take():
        nonlocal i
        tok = tokens[i]
        i += 1
        return tok

    def fail(tok, what):
        raise ModelError(f"{what} at position {tok[2]} in guard {text!r}")

    def var_of(tok):
        if tok[1] not in index:
            fail(tok, f"unknown variable {tok[1]!r}")
        return index[tok[1]]

    def atom():
        tok = take()
        if tok[0] == "op" and tok[1] == "(":
            g = disj()
            if take()[1] != ")":
                fail(tokens[i - 1], "expected ')'")
            return g
        if tok[0] == "num":
            if take()[1] != "<":
                fail(tokens[i - 1], "expected '<'")
            name = take()
            if name[0] != "id":
                fail(name, "expected variable")
            return GuardAtom(var_of(name), float(tok[1]), True)
        if tok[0] == "id":
            if take()[1] != "<":
                fail(tokens[i - 1], "expected '<'")
            num = take()
            if num[0] != "num":
                fail(num, "expected number")
            return GuardAtom(var_of(tok), float(num[1]), False)
        fail(tok, "expected guard atom")

    def conj():
        g = atom()
        while peek()[1] == "&&":
            take()
            g = GuardAnd(g, atom())
        return g

    def disj():
        g = conj()
        while peek()[1] == "||":
            take()
            g = GuardOr(g, conj())
        return g

    g = disj()
    if peek()[0] != "end":
        fail(peek(), f"unexpected {peek()[1]!r}")
    return g


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_guard(g: Guard, variables: Sequence[str]) -> str:
    # parser is left associative with && binding tighter than ||
    def fmt(g, wrap_and, wrap_or):
        if isinstance(g, GuardAtom):
            name = variables[g.var]
            return f"{_num(g.bound)} < {name}" if g.lower else f"{name} < {_num(g.bound)}"
        if isinstance(g, GuardAnd):
            s = f"{fmt(g.left, False, True)} && {fmt(g.right, True, True)}"
            return f"({s})" if wrap_and else s
        s = f"{fmt(g.left, False, False)} || {fmt(g.right, False, True)}"
        return f"({s})" if wrap_or else s

    return fmt(g, False, False)


def guard_sat(g: Guard, v: Sequence[float]) -> bool:
    if isinstance(g, GuardAtom):
        x = v[g.var]
        return g.bound < x if g.lower else x < g.bound
    if isinstance(g, GuardAnd):
        return guard_sat(g.left, v) and guard_sat(g.right, v)
    return guard_sat(g.left, v) or guard_sat(g.right, v)


def guard_boxes(g: Guard, n: int) -> list[tuple[tuple[float, ...], tuple[float, ...]]]:
    """Disjunctive normal form as open boxes ``(lo, hi)``; ``v`` satisfies the
    guard iff ``lo[i] < v[i] < hi[i]`` for all ``i`` in some box."""
    if isinstance(g, GuardAtom):
        lo = [-math.inf] * n
        hi = [math.inf] * n
        if g.lower:
            lo[g.var] = g.bound
        else:
            hi[g.var] = g.bound
        return [(tuple(lo), tuple(hi))]
    if isinstance(g, GuardOr):
        return guard_boxes(g.left, n) + guard_boxes(g.right, n)
    out = []
    for alo, ahi in guard_boxes(g.left, n):
        for blo, bhi in guard_boxes(g.right, n):
            lo = tuple(max(a, b) for a, b in zip(alo, blo))
            hi = tuple(min(a, b) for a, b in zip(ahi, bhi))
            if all(l < h for l, h in zip(lo, hi)):
                out.append((lo, hi))
    return out


def guard_constants(g: Guard) -> set[tuple[int, float]]:
    if isinstance(g, GuardAtom):
        return {(g.var, g.bound)}
    return guard_constants(g.left) | guard_constants(g.right)


# --------------------------------------------------------------------------
# automaton


@dataclass(frozen=True)
class InitBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    distribution: str = "uniform"

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ModelError("init box bounds differ in length")
        for lo, hi in zip(self.lower, self.upper):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ModelError(f"init interval ({lo}, {hi}) is not a non-empty open interval")
        if self.distribution != "uniform":
            raise ModelError(f"only uniform initial distributions are supported, got {self.distribution!r}")

    def measure(self) -> float:
        return math.prod(hi - lo for lo, hi in zip(self.lower, self.upper))


@dataclass(frozen=True)
class InputSignal:
    """Piecewise-constant signal; ``schedule`` holds ``(start_time, value)``
    breakpoints in model time.  With ``period > 0`` the schedule repeats."""

    name: str
    schedule: tuple[tuple[float, float], ...]
    period: float = 0.0

    def __post_init__(self):
        if not self.schedule:
            raise ModelError(f"input {self.name!r} has an empty schedule")
        times = [t for t, _ in self.schedule]
        if times[0] != 0:
            raise ModelError(f"input {self.name!r} must start at time 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ModelError(f"input {self.name!r} breakpoints must be strictly increasing")
        if self.period < 0 or (self.period > 0 and times[-1] >= self.period):
            raise ModelError(f"input {self.name!r} has an invalid period")


def input_value(s: InputSignal, t: float, horizon: float | None = None) -> float:
    """Value of the latest breakpoint at or before model time ``t``."""
    if t < 0 or (horizon is not None and t > horizon):
        raise ModelError(f"time {t} outside [0, {horizon}] for input {s.name!r}")
    if s.period > 0:
        t = math.fmod(t, s.period)
    value = s.schedule[0][1]
    for start, v in s.schedule:
        if start <= t:
            value = v
        else:
            break
    return value


@dataclass(frozen=True)
class Mode:
    name: str
    rhs: tuple[Expr, ...]
    labels: frozenset[str] = frozenset()
    constants: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    guard: Guard


@dataclass(frozen=True)
class HybridAutomaton:
    name: str
    variables: tuple[str, ...]
    parameters: tuple[tuple[str, float], ...]
    definitions: tuple[tuple[str, Expr], ...]
    inputs: tuple[InputSignal, ...]
    modes: tuple[Mode, ...]
    initial_mode: str
    transitions: tuple[Transition, ...]
    init: InitBox
    delta: float = 1.0
    horizon: int = 100

    def __post_init__(self):
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def mode_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modes)

    def mode_index(self, name: str) -> int:
        try:
            return self.mode_names.index(name)
        except ValueError:
            raise ModelError(f"unknown mode {name!r}") from None

    def mode(self, name: str) -> Mode:
        return self.modes[self.mode_index(name)]

    def outgoing(self, mode: str) -> list[tuple[int, Transition]]:
        return [(i, t) for i, t in enumerate(self.transitions) if t.source == mode]

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.parameters)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset().union(*(m.labels for m in self.modes))

    def with_parameters(self, **updates: float) -> "HybridAutomaton":
        params = dict(self.parameters)
        for k, v in updates.items():
            if k not in params:
                raise ModelError(f"unknown parameter {k!r}")
            params[k] = float(v)
        return _replace(self, parameters=tuple(params.items()))


def _replace(h: HybridAutomaton, **changes) -> HybridAutomaton:
    from dataclasses import replace

    return replace(h, **changes)


def _validate(h: HybridAutomaton) -> None:
    if not h.variables:
        raise ModelError("automaton has no variables")
    if not h.modes:
        raise ModelError("automaton has no modes")
    names = list(h.variables) + [p for p, _ in h.parameters] + [d for d, _ in h.definitions]
    names += [s.name for s in h.inputs]
    dupes = {x for x in names if names.count(x) > 1}
    if dupes:
        raise ModelError(f"duplicate symbol(s): {sorted(dupes)}")
    mode_names = [m.name for m in h.modes]
    if len(set(mode_names)) != len(mode_names):
        raise ModelError("duplicate mode names")
    if h.initial_mode not in mode_names:
        raise ModelError(f"initial mode {h.initial_mode!r} is not a mode")
    if not (h.delta > 0 and math.isfinite(h.delta)):
        raise ModelError("delta must be positive")
    if h.horizon < 1:
        raise ModelError("horizon must be at least 1")
    if len(h.init.lower) != h.n:
        raise ModelError("init box dimension does not match the variables")
    for name, value in h.parameters:
        if not math.isfinite(value):
            raise ModelError(f"parameter {name!r} is not finite")
    known = set(names)
    for mode in h.modes:
        if len(mode.rhs) != h.n:
            raise ModelError(f"mode {mode.name!r} has {len(mode.rhs)} equations, expected {h.n}")
        local = known | {c for c, _ in mode.constants}
        for e in mode.rhs:
            missing = free_symbols(e) - local
            if missing:
                raise ModelError(f"mode {mode.name!r} uses undeclared symbol(s) {sorted(missing)}")
    for t in h.transitions:
        for end in (t.source, t.target):
            if end not in mode_names:
                raise ModelError(f"transition endpoint {end!r} is not a mode")
        for var, _ in guard_constants(t.guard):
            if not 0 <= var < h.n:
                raise ModelError("guard variable index out of range")


# --------------------------------------------------------------------------
# documents


def _symbol_table(variables, parameters, definitions, inputs) -> dict[str, str]:
    table = {v: VAR for v in variables}
    table.update({p: PARAM for p in parameters})
    table.update({s: INPUT for s in inputs})
    table.update({d: DEF for d in definitions})
    return table


def _as_float(x, what: str) -> float:
    if isinstance(x, str):
        try:
            from fractions import Fraction

            return float(Fraction(x.strip()))
        except ValueError:
            raise ModelError(f"{what}: {x!r} is not a number") from None
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ModelError(f"{what}: {x!r} is not a number")
    return float(x)


def model_from_dict(doc: dict) -> HybridAutomaton:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a mapping")
    required = ("variables", "modes", "initial_mode", "init")
    for key in required:
        if key not in doc:
            raise ModelError(f"missing section {key!r}")
    allowed = {"format", "name", "variables", "parameters", "definitions", "inputs", "modes",
               "initial_mode", "transitions", "init", "delta", "horizon"}
    extra = set(doc) - allowed
    if extra:
        raise ModelError(f"unknown section(s) {sorted(extra)}")
    variables = tuple(str(v) for v in doc["variables"])
    parameters = tuple((str(k), _as_float(v, f"parameter {k}")) for k, v in (doc.get("parameters") or {}).items())
    inputs = []
    for name, spec in (doc.get("inputs") or {}).items():
        if not isinstance(spec, dict) or "schedule" not in spec:
            raise ModelError(f"input {name!r} needs a schedule")
        sched = tuple((_as_float(t, f"input {name}"), _as_float(v, f"input {name}")) for t, v in spec["schedule"])
        inputs.append(InputSignal(str(name), sched, _as_float(spec.get("period", 0), f"input {name}")))
    def_names = [str(k) for k in (doc.get("definitions") or {})]
    table = _symbol_table(variables, [p for p, _ in parameters], [], [s.name for s in inputs])
    definitions = []
    for name, text in (doc.get("definitions") or {}).items():
        definitions.append((str(name), parse_expr(str(text), table)))
        table[str(name)] = DEF
    modes_doc = doc["modes"]
    if not modes_doc:
        raise ModelError("empty mode set")
    modes = []
    for mname, mdoc in modes_doc.items():
        mdoc = mdoc or {}
        consts = tuple((str(k), _as_float(v, f"mode {mname} constant {k}")) for k, v in (mdoc.get("constants") or {}).items())
        local = dict(table)
        local.update({c: CONST for c, _ in consts})
        ode = mdoc.get("ode") or {}
        if set(ode) != set(variables):
            raise ModelError(f"mode {mname!r} must give an ode for each of {list(variables)}")
        rhs = tuple(parse_expr(str(ode[v]), local) for v in variables)
        modes.append(Mode(str(mname), rhs, frozenset(str(x) for x in mdoc.get("labels") or ()), consts))
    transitions = []
    for tdoc in doc.get("transitions") or ():
        try:
            transitions.append(Transition(str(tdoc["from"]), str(tdoc["to"]), parse_guard(str(tdoc["guard"]), variables)))
        except KeyError as err:
            raise ModelError(f"transition missing field {err}") from None
    init_doc = doc["init"]
    box = init_doc.get("box") or {}
    if set(box) != set(variables):
        raise ModelError("init box must bound every variable")
    lower = tuple(_as_float(box[v][0], f"init {v}") for v in variables)
    upper = tuple(_as_float(box[v][1], f"init {v}") for v in variables)
    init = InitBox(lower, upper, str(init_doc.get("distribution", "uniform")))
    horizon = doc.get("horizon", 100)
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise ModelError("horizon must be an integer step count")
    h = HybridAutomaton(
        name=str(doc.get("name", "model")),
        variables=variables,
        parameters=parameters,
        definitions=tuple(definitions),
        inputs=tuple(inputs),
        modes=tuple(modes),
        initial_mode=str(doc["initial_mode"]),
        transitions=tuple(transitions),
        init=init,
        delta=_as_float(doc.get("delta", 1.0), "delta"),
        horizon=horizon,
    )
    for m in h.modes:
        if any(contains_select(e) for e in m.rhs) or any(contains_select(e) for _, e in h.definitions):
            warnings.warn(f"mode {m.name!r}: select() makes the vector field non-smooth", stacklevel=2)
            break
    return h


def parse_model(document: str) -> HybridAutomaton:
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as err:
        raise ModelError(f"not a valid model document: {err}") from None
    return model_from_dict(doc)


def model_to_dict(h: HybridAutomaton) -> dict:
    doc: dict = {"format": FORMAT_TAG, "name": h.name, "variables": list(h.variables)}
    doc["parameters"] = {k: v for k, v in h.parameters}
    if h.definitions:
        doc["definitions"] = {k: format_expr(e) for k, e in h.definitions}
    if h.inputs:
        doc["inputs"] = {}
        for s in h.inputs:
            spec: dict = {"schedule": [[t, v] for t, v in s.schedule]}
            if s.period:
                spec["period"] = s.period
            doc["inputs"][s.name] = spec
    doc["modes"] = {}
    for m in h.modes:
        mdoc: dict = {}
        if m.labels:
            mdoc["labels"] = sorted(m.labels)
        if m.constants:
            mdoc["constants"] = {k: v for k, v in m.constants}
        mdoc["ode"] = {v: format_expr(e) for v, e in zip(h.variables, m.rhs)}
        doc["modes"][m.name] = mdoc
    doc["initial_mode"] = h.initial_mode
    doc["transitions"] = [
        {"from": t.source, "to": t.target, "guard": format_guard(t.guard, h.variables)} for t in h.transitions
    ]
    doc["init"] = {
        "distribution": h.init.distribution,
        "box": {v: [lo, hi] for v, lo, hi in zip(h.variables, h.init.lower, h.init.upper)},
    }
    doc["delta"] = h.delta
    doc["horizon"] = h.horizon
    return doc


def serialize_model(h: HybridAutomaton) -> str:
    return yaml.safe_dump(model_to_dict(h), sort_keys=False, default_flow_style=None, width=100)


def symbols_of(h: HybridAutomaton) -> dict[str, str]:
    return _symbol_table(h.variables, [p for p, _ in h.parameters], [d for d, _ in h.definitions],
                         [s.name for s in h.inputs])


def iter_rhs(h: HybridAutomaton) -> Iterable[tuple[Mode, int, Expr]]:
    for m in h.modes:
        for i, e in enumerate(m.rhs):
            yield m, i, e
