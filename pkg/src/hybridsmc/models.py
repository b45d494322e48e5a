"""Builtin case studies: a four-mode cardiac cell and a sixteen-mode
circadian clock, plus the property table used to exercise them.

Models are addressable by URI, e.g.
``builtin:cardiac?cell=epi&cond=healthy&stim=transient`` or
``builtin:circadian?variant=cry-mutant``.  Any other query key is taken as a
parameter override (``builtin:cardiac?cell=epi&tau_s2=2``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable
from urllib.parse import parse_qsl, urlsplit

import yaml

from .model import HybridAutomaton, ModelError, model_from_dict

__all__ = [
    "CELL_TYPES",
    "CONDITIONS",
    "STIMULI",
    "CIRCADIAN_VARIANTS",
    "CIRCADIAN_MODES",
    "PROPERTIES",
    "CaseStudy",
    "SuiteRow",
    "cardiac_model",
    "circadian_model",
    "circadian_document",
    "property_suite",
    "case_study",
    "builtin_model",
]

CELL_TYPES = ("EPI", "ENDO", "MID")
CONDITIONS = ("healthy", "diseased")
STIMULI = ("transient", "sustained")
CIRCADIAN_VARIANTS = ("wild", "cry-mutant", "rev-erb-mutant", "no-percry-dependence")

# stimulus duration in ms; the stimulus has unit amplitude
_STIMULUS_MS = {"transient": 1.0, "sustained": 500.0}
# the diseased cell loses excitability through a very fast resting decay
_DISEASED = {"tau_o1": 0.004}


def _data(name: str) -> dict:
    return yaml.safe_load(resources.files("hybridsmc").joinpath("data").joinpath(name).read_text())


@lru_cache(maxsize=None)
def _cardiac_base() -> str:
    return resources.files("hybridsmc").joinpath("data", "cardiac.yaml").read_text()


@lru_cache(maxsize=None)
def _cells() -> dict:
    return _data("cardiac_cells.yaml")


def cardiac_model(cell: str = "EPI", condition: str = "healthy", stimulus: str = "transient",
                  **overrides: float) -> HybridAutomaton:
    """Cardiac cell automaton for one cell type, condition and stimulus.

    ``overrides`` replace individual parameters after the cell column and the
    condition have been applied."""
    cell = cell.upper()
    if cell not in CELL_TYPES:
        raise ModelError(f"unknown cell type {cell!r}; expected one of {CELL_TYPES}")
    if condition not in CONDITIONS:
        raise ModelError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
    if stimulus not in STIMULI:
        raise ModelError(f"unknown stimulus {stimulus!r}; expected one of {STIMULI}")
    doc = yaml.safe_load(_cardiac_base())
    params = dict(_cells()[cell])
    if condition == "diseased":
        params.update(_DISEASED)
    for k, v in overrides.items():
        if k not in params:
            raise ModelError(f"unknown cardiac parameter {k!r}")
        params[k] = float(v)
    doc["parameters"] = params
    doc["inputs"]["eps"]["schedule"] = [[0, 1], [_STIMULUS_MS[stimulus], 0]]
    doc["name"] = f"cardiac-{cell.lower()}-{condition}-{stimulus}"
    return model_from_dict(doc)


# --------------------------------------------------------------------------
# circadian clock

# (PC1, PC2, PC3, RE, CB) for modes 1..16
CIRCADIAN_MODES = (
    (1, 1, 0, 1, 0), (1, 1, 0, 1, 1), (1, 1, 0, 0, 0), (1, 1, 0, 0, 1),
    (0, 1, 0, 1, 0), (0, 1, 0, 1, 1), (0, 1, 0, 0, 0), (0, 1, 0, 0, 1),
    (0, 0, 0, 1, 0), (0, 0, 0, 1, 1), (0, 0, 0, 0, 0), (0, 0, 0, 0, 1),
    (0, 0, 1, 1, 0), (0, 0, 1, 1, 1), (0, 0, 1, 0, 0), (0, 0, 1, 0, 1),
)
_INDICATORS = ("th_PC1", "th_PC2", "th_PC3", "th_RE", "th_CB")
# guard component of each indicator, and the interior of its complement
_ON = (
    "PER-CRY < 1.4",
    "1.4 < PER-CRY && PER-CRY < 1.5",
    "2.2 < PER-CRY",
    "REV-ERB < 1.1",
    "1 < CLOCK-BMAL",
)
_OFF = (
    "1.4 < PER-CRY",
    "PER-CRY < 1.4 || 1.5 < PER-CRY",
    "PER-CRY < 2.2",
    "1.1 < REV-ERB",
    "CLOCK-BMAL < 1",
)
_CIRCADIAN_VARS = ("Per", "PER", "Cry", "CRY", "PER-CRY", "Rev-Erb", "REV-ERB", "CLOCK", "Bmal", "BMAL",
                   "CLOCK-BMAL")
_CIRCADIAN_ODE = {
    "Per": "-k1 * Per + k13 * th_PC2 * th_CB + k14",
    "PER": "-k2 * PER + k15 * Per - k16 * PER * CRY",
    "Cry": "-k3 * Cry + k17 * th_PC2 * th_CB + k18",
    "CRY": "-k4 * CRY + k19 * Cry - k16 * PER * CRY",
    "PER-CRY": "-k5 * PER-CRY + k16 * PER * CRY",
    "Rev-Erb": "-k6 * Rev-Erb + k20 * th_PC1 * th_CB + k21",
    "REV-ERB": "-k7 * REV-ERB + k22 * Rev-Erb",
    "CLOCK": "-k9 * CLOCK + k24 * Clock - k25 * CLOCK * BMAL",
    "Bmal": "-k10 * Bmal + k26 * th_PC3 * th_RE + k27",
    "BMAL": "-k11 * BMAL + k28 * Bmal - k25 * CLOCK * BMAL",
    "CLOCK-BMAL": "-k12 * CLOCK-BMAL + k25 * CLOCK * BMAL",
}
# synthesis constants removed by each mutant
_KNOCKOUTS = {"cry-mutant": ("k17", "k18"), "rev-erb-mutant": ("k20", "k21")}


@lru_cache(maxsize=None)
def _circadian_config() -> dict:
    return _data("circadian_rates.yaml")


def circadian_document(variant: str = "wild", clock_period: float | None = None,
                       clock_on: float | None = None, init: tuple[float, float] | None = None,
                       **overrides: float) -> dict:
    """Model document for the circadian clock (see :func:`circadian_model`)."""
    if variant not in CIRCADIAN_VARIANTS:
        raise ModelError(f"unknown circadian variant {variant!r}; expected one of {CIRCADIAN_VARIANTS}")
    cfg = _circadian_config()
    rates = {k: float(v) for k, v in cfg["rates"].items()}
    for k, v in overrides.items():
        if k not in rates:
            raise ModelError(f"unknown circadian rate {k!r}")
        rates[k] = float(v)
    for k in _KNOCKOUTS.get(variant, ()):
        rates[k] = 0.0
    ode = dict(_CIRCADIAN_ODE)
    if variant == "no-percry-dependence":
        ode["Bmal"] = "-k10 * Bmal + k26 * th_RE + k27"

    period = float(cfg["clock"]["period"] if clock_period is None else clock_period)
    on = float(cfg["clock"]["pulse"] if clock_on is None else clock_on)
    if not 0 < on < period:
        raise ModelError("clock on-time must lie strictly inside the period")
    lo, hi = cfg["init"] if init is None else init

    modes = {}
    for i, ind in enumerate(CIRCADIAN_MODES, start=1):
        modes[f"m{i}"] = {"labels": [f"mode {i}"], "constants": dict(zip(_INDICATORS, ind)), "ode": ode}
    transitions = []
    for (i, a), (j, b) in itertools.permutations(enumerate(CIRCADIAN_MODES, start=1), 2):
        diff = [x for x in range(5) if a[x] != b[x]]
        if len(diff) == 1:
            x = diff[0]
            transitions.append({"from": f"m{i}", "to": f"m{j}", "guard": _ON[x] if b[x] else _OFF[x]})
    return {
        "name": f"circadian-{variant}",
        "variables": list(_CIRCADIAN_VARS),
        "parameters": rates,
        "inputs": {"Clock": {"schedule": [[0, 1], [on, 0]], "period": period}},
        "modes": modes,
        "initial_mode": "m1",
        "transitions": transitions,
        "init": {"box": {v: [lo, hi] for v in _CIRCADIAN_VARS}},
        "delta": float(cfg["delta"]),
        "horizon": int(cfg["horizon"]),
    }


def circadian_model(variant: str = "wild", clock_period: float | None = None, clock_on: float | None = None,
                    init: tuple[float, float] | None = None, **overrides: float) -> HybridAutomaton:
    """Sixteen-mode circadian clock.  Mode ``m<i>`` carries the indicator
    combination of row ``i`` of :data:`CIRCADIAN_MODES` as constants; modes
    are connected when their indicators differ in exactly one place.  Clock
    mRNA is an external square wave."""
    return model_from_dict(circadian_document(variant, clock_period, clock_on, init, **overrides))


# --------------------------------------------------------------------------
# properties and the results table

PROPERTIES = {
    "C1": "F<=500(![Resting mode])",
    "C2": "F<=500([AP mode]) & F<=500(G<=100([Resting mode]))",
    "C3": "F<=500(G<=1([1.4 <= u]) & F<=500([0.8 <= u] & [u <= 1.1] & F<=500(G<=50([1.1 <= u]))))",
    "R1": "F<=500([1.5 <= Bmal] & F<=500([Bmal <= 0.8] & F<=500([1.5 <= Bmal] & "
          "F<=500([Bmal <= 0.8] & F<=500([1.5 <= Bmal])))))",
    "R2": "F<=500([Bmal <= 0.8] & [2.0 <= Per] & [2.0 <= Cry] & "
          "F<=500([1.5 <= Bmal] & [Per <= 0.8] & [Cry <= 0.8] & "
          "F<=500([Bmal <= 0.8] & [2.0 <= Per] & [2.0 <= Cry] & "
          "F<=500([1.5 <= Bmal] & [Per <= 0.8] & [Cry <= 0.8]))))",
}


@dataclass(frozen=True)
class SuiteRow:
    property: str
    condition: str
    uri: str
    expected: bool
    samples: int

    @property
    def text(self) -> str:
        return PROPERTIES[self.property]

    @property
    def study(self) -> str:
        return "cardiac" if self.property.startswith("C") else "circadian"


def _card(cell, cond="healthy", stim="transient", **extra):
    q = f"cell={cell.lower()}&cond={cond}&stim={stim}"
    q += "".join(f"&{k}={v}" for k, v in extra.items())
    return f"builtin:cardiac?{q}"


def _circ(variant):
    return f"builtin:circadian?variant={variant}"


_ROWS = (
    ("C1", "Epicardial, Healthy", _card("epi"), True),
    ("C1", "Endocardial, Healthy", _card("endo"), True),
    ("C1", "Midmyocardial, Healthy", _card("mid"), True),
    ("C1", "Epicardial, Diseased", _card("epi", "diseased"), False),
    ("C1", "Endocardial, Diseased", _card("endo", "diseased"), False),
    ("C1", "Midmyocardial, Diseased", _card("mid", "diseased"), False),
    ("C2", "Epicardial, Transient", _card("epi"), True),
    ("C2", "Endocardial, Transient", _card("endo"), True),
    ("C2", "Midmyocardial, Transient", _card("mid"), True),
    ("C2", "Epicardial, Sustained", _card("epi", stim="sustained"), False),
    ("C2", "Endocardial, Sustained", _card("endo", stim="sustained"), False),
    ("C2", "Midmyocardial, Sustained", _card("mid", stim="sustained"), False),
    ("C3", "Epicardial, tau_s2=16", _card("epi"), True),
    ("C3", "Epicardial, tau_s2=2", _card("epi", tau_s2=2), False),
    ("C3", "Endocardial", _card("endo"), False),
    ("C3", "Midmyocardial", _card("mid"), False),
    ("R1", "Wild type", _circ("wild"), True),
    ("R1", "Cry mutant", _circ("cry-mutant"), False),
    ("R1", "Rev-Erb mutant", _circ("rev-erb-mutant"), True),
    ("R2", "Wild type", _circ("wild"), True),
    ("R2", "Without PER-CRY dependence", _circ("no-percry-dependence"), False),
    ("R1", "Without PER-CRY dependence", _circ("no-percry-dependence"), True),
)


def property_suite(study: str | None = None) -> list[SuiteRow]:
    """Rows of the results table, optionally restricted to ``"cardiac"`` or
    ``"circadian"``.  Expected sample counts are for delta = alpha = 0.01."""
    if study not in (None, "cardiac", "circadian"):
        raise ValueError(f"unknown study {study!r}")
    rows = [SuiteRow(p, c, u, e, 459 if e else 1) for p, c, u, e in _ROWS]
    return [r for r in rows if study is None or r.study == study]


@dataclass(frozen=True)
class CaseStudy:
    name: str
    build: Callable[..., HybridAutomaton]
    scenarios: tuple[str, ...]
    properties: tuple[str, ...]

    def rows(self) -> list[SuiteRow]:
        return property_suite(self.name)


def case_study(name: str) -> CaseStudy:
    if name == "cardiac":
        scen = tuple(f"{c}/{d}/{s}" for c in CELL_TYPES for d in CONDITIONS for s in STIMULI)
        return CaseStudy("cardiac", cardiac_model, scen, ("C1", "C2", "C3"))
    if name == "circadian":
        return CaseStudy("circadian", circadian_model, CIRCADIAN_VARIANTS, ("R1", "R2"))
    raise ValueError(f"unknown case study {name!r}")


def _number(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelError(f"override {key}={text!r} is not a number") from None


def builtin_model(uri: str) -> HybridAutomaton:
    """Resolve a ``builtin:`` URI to an automaton."""
    parts = urlsplit(uri)
    if parts.scheme != "builtin":
        raise ModelError(f"not a builtin model URI: {uri!r}")
    query = dict(parse_qsl(parts.query, strict_parsing=bool(parts.query)))
    name = parts.path
    if name == "cardiac":
        cell = query.pop("cell", "epi")
        cond = query.pop("cond", "healthy")
        stim = query.pop("stim", "transient")
        return cardiac_model(cell, cond, stim, **{k: _number(k, v) for k, v in query.items()})
    if name == "circadian":
        variant = query.pop("variant", "wild")
        period = query.pop("clock_period", None)
        on = query.pop("clock_on", None)
        return circadian_model(variant, None if period is None else _number("clock_period", period),
                               None if on is None else _number("clock_on", on),
                               **{k: _number(k, v) for k, v in query.items()})
    raise ModelError(f"unknown builtin model {name!r}; expected cardiac or circadian")
