"""Fixed-step RK4 realisation of the unit-interval mode flows.

Time inside the engine is normalised so one discrete step is one unit; the
vector field is scaled by the automaton's ``delta`` and inputs are looked up
at model time ``g * delta`` where ``g`` is the normalised global time.  Inputs
are held at their value at the start of each RK4 substep.

Right-hand sides are turned into Python source, compiled with numba and
cached by source text, so automata that differ only in parameter values share
one compiled function.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numba
import numpy as np
from numba import types

from .expr import Binary, Const, Expr, Select, Sym, Unary
from .model import HybridAutomaton, guard_boxes

__all__ = [
    "FlowConfig",
    "FlowError",
    "CompiledModel",
    "compile_model",
    "rhs_source",
    "flow",
    "flow_at_points",
    "BLOWUP_LIMIT",
]

BLOWUP_LIMIT = 1e12

RHS_SIG = types.void(types.int64, types.float64[::1], types.float64[::1], types.float64[::1], types.float64[::1])
RHS_TYPE = types.FunctionType(RHS_SIG)


@dataclass(frozen=True)
class FlowConfig:
    substeps: int = 100

    def __post_init__(self):
        if not isinstance(self.substeps, (int, np.integer)) or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")


class FlowError(ArithmeticError):
    """State became non-finite or exceeded the blow-up limit."""

    def __init__(self, mode: str, time: float, state=None):
        super().__init__(f"integration blew up in mode {mode!r} at model time {time:g}")
        self.mode = mode
        self.time = time
        self.state = state


# --------------------------------------------------------------------------
# code generation

_FUNCS = {"exp": "math.exp", "ln": "math.log", "tanh": "math.tanh", "sqrt": "math.sqrt", "abs": "abs"}


def _emit(e: Expr, names: dict[str, str]) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Sym):
        return names[e.name]
    if isinstance(e, Unary):
        a = _emit(e.arg, names)
        if e.op == "neg":
            return f"(-{a})"
        return f"{_FUNCS[e.op]}({a})"
    if isinstance(e, Binary):
        a, b = _emit(e.left, names), _emit(e.right, names)
        if e.op == "pow":
            return f"math.pow({a}, {b})"
        if e.op in ("min", "max"):
            return f"{e.op}({a}, {b})"
        return f"({a} {e.op} {b})"
    if isinstance(e, Select):
        c, a, b = (_emit(x, names) for x in (e.cond, e.if_nonneg, e.if_neg))
        return f"({a} if {c} >= 0.0 else {b})"
    raise TypeError(f"not an expression: {e!r}")


def rhs_source(h: HybridAutomaton) -> str:
    """Source of ``rhs(q, x, u, p, out)`` writing ``F_q(x)`` into ``out``."""
    names = {v: f"x[{i}]" for i, v in enumerate(h.variables)}
    names.update({p: f"p[{i}]" for i, (p, _) in enumerate(h.parameters)})
    names.update({s.name: f"u[{i}]" for i, s in enumerate(h.inputs)})
    lines = ["def rhs(q, x, u, p, out):"]
    for qi, mode in enumerate(h.modes):
        local = dict(names)
        local.update({c: repr(float(v)) for c, v in mode.constants})
        # definitions are inlined so mode constants fold into them
        for d, e in h.definitions:
            local[d] = f"d_{qi}_{len(local)}"
        kw = "if" if qi == 0 else "elif"
        lines.append(f"    {kw} q == {qi}:")
        for d, e in h.definitions:
            lines.append(f"        {local[d]} = {_emit(e, local)}")
        for i, e in enumerate(mode.rhs):
            lines.append(f"        out[{i}] = {_emit(e, local)}")
    lines.append("    else:")
    lines.append("        for i in range(out.shape[0]):")
    lines.append("            out[i] = math.nan")
    return "\n".join(lines) + "\n"


_rhs_cache: dict[str, object] = {}
_rhs_lock = threading.Lock()


def _compile_rhs(source: str):
    with _rhs_lock:
        fn = _rhs_cache.get(source)
        if fn is None:
            scope = {"math": math}
            exec(compile(source, "<rhs>", "exec"), scope)
            fn = numba.njit(RHS_SIG, nogil=True, error_model="numpy")(scope["rhs"])
            _rhs_cache[source] = fn
        return fn


# --------------------------------------------------------------------------
# compiled model tables


@dataclass
class CompiledModel:
    """Flat numeric tables for the jitted kernels."""

    automaton: HybridAutomaton
    rhs: object
    params: np.ndarray
    delta: float
    in_t: np.ndarray
    in_v: np.ndarray
    in_off: np.ndarray  # start offsets, length n_inputs + 1
    in_period: np.ndarray
    tr_off: np.ndarray  # outgoing transitions of mode q: tr_off[q]:tr_off[q+1]
    tr_index: np.ndarray  # automaton transition index per slot
    tr_target: np.ndarray
    box_off: np.ndarray  # boxes of slot s: box_off[s]:box_off[s+1]
    box_lo: np.ndarray
    box_hi: np.ndarray
    init_lo: np.ndarray
    init_hi: np.ndarray
    q0: int

    @property
    def n(self) -> int:
        return self.automaton.n


def compile_model(h: HybridAutomaton) -> CompiledModel:
    rhs = _compile_rhs(rhs_source(h))
    params = np.array([v for _, v in h.parameters] or [0.0], dtype=np.float64)
    in_t, in_v, in_off, in_period = [], [], [0], []
    for s in h.inputs:
        in_t += [t for t, _ in s.schedule]
        in_v += [v for _, v in s.schedule]
        in_off.append(len(in_t))
        in_period.append(s.period)
    tr_off, tr_index, tr_target, box_off, box_lo, box_hi = [0], [], [], [0], [], []
    for m in h.modes:
        for i, t in h.outgoing(m.name):
            tr_index.append(i)
            tr_target.append(h.mode_index(t.target))
            for lo, hi in guard_boxes(t.guard, h.n):
                box_lo.append(lo)
                box_hi.append(hi)
            box_off.append(len(box_lo))
        tr_off.append(len(tr_index))
    n = h.n
    return CompiledModel(
        automaton=h,
        rhs=rhs,
        params=params,
        delta=float(h.delta),
        in_t=np.array(in_t + [0.0], dtype=np.float64),
        in_v=np.array(in_v + [0.0], dtype=np.float64),
        in_off=np.array(in_off, dtype=np.int64),
        in_period=np.array(in_period + [0.0], dtype=np.float64),
        tr_off=np.array(tr_off, dtype=np.int64),
        tr_index=np.array(tr_index + [0], dtype=np.int64),
        tr_target=np.array(tr_target + [0], dtype=np.int64),
        box_off=np.array(box_off, dtype=np.int64),
        box_lo=np.array(box_lo, dtype=np.float64).reshape(-1, n) if box_lo else np.zeros((0, n)),
        box_hi=np.array(box_hi, dtype=np.float64).reshape(-1, n) if box_hi else np.zeros((0, n)),
        init_lo=np.array(h.init.lower, dtype=np.float64),
        init_hi=np.array(h.init.upper, dtype=np.float64),
        q0=h.mode_index(h.initial_mode),
    )


# --------------------------------------------------------------------------
# jitted primitives

_jit = numba.njit(cache=True, nogil=True)


@_jit
def inputs_at(tau, in_t, in_v, in_off, in_period, u):
    for s in range(in_off.shape[0] - 1):
        t = tau
        if in_period[s] > 0.0:
            t = np.fmod(t, in_period[s])
        a, b = in_off[s], in_off[s + 1]
        val = in_v[a]
        for i in range(a, b):
            if in_t[i] <= t:
                val = in_v[i]
            else:
                break
        u[s] = val


@_jit
def _rk4(rhs, q, x, dt, g, delta, p, in_t, in_v, in_off, in_period, u, w):
    """One RK4 step of length ``dt`` (normalised) from global time ``g``; result
    written back into ``x``.  ``w`` is a (5, n) work array."""
    n = x.shape[0]
    inputs_at(g * delta, in_t, in_v, in_off, in_period, u)
    k1, k2, k3, k4, y = w[0], w[1], w[2], w[3], w[4]
    rhs(q, x, u, p, k1)
    for i in range(n):
        y[i] = x[i] + 0.5 * dt * delta * k1[i]
    rhs(q, y, u, p, k2)
    for i in range(n):
        y[i] = x[i] + 0.5 * dt * delta * k2[i]
    rhs(q, y, u, p, k3)
    for i in range(n):
        y[i] = x[i] + dt * delta * k3[i]
    rhs(q, y, u, p, k4)
    ok = True
    for i in range(n):
        x[i] = x[i] + dt * delta / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not (abs(x[i]) <= 1e12):
            ok = False
    return ok


@_jit
def integrate_points(rhs, q, v, times, npts, g0, nsub, delta, p, in_t, in_v, in_off, in_period,
                     u, w, grid, out):
    """Integrate mode ``q`` from ``v`` at global time ``g0`` and store the state
    at each of the sorted ``times[:npts]`` in ``out``.  Full substeps follow the
    grid ``0, h, 2h, ...`` and each point is reached by a shortened step from
    the last grid state, so results equal independent single-point calls.

    ``grid`` is left holding the state at the last grid point visited; the
    return value is that grid index, or -1 after a blow-up."""
    n = v.shape[0]
    for i in range(n):
        grid[i] = v[i]
    h = 1.0 / nsub
    m = 0
    tmp = np.empty(n)
    for j in range(npts):
        t = times[j]
        target = int(t * nsub)
        if target > nsub:
            target = nsub
        while target > 0 and target * h > t:
            target -= 1
        while m < target:
            if not _rk4(rhs, q, grid, h, g0 + m * h, delta, p, in_t, in_v, in_off, in_period, u, w):
                return -1
            m += 1
        rest = t - m * h
        for i in range(n):
            tmp[i] = grid[i]
        if rest > 0.0:
            if not _rk4(rhs, q, tmp, rest, g0 + m * h, delta, p, in_t, in_v, in_off, in_period, u, w):
                return -1
        for i in range(n):
            out[j, i] = tmp[i]
    return m


@_jit
def integrate_from_grid(rhs, q, grid, m, t, g0, nsub, delta, p, in_t, in_v, in_off, in_period, u, w):
    """Continue a grid integration at grid index ``m`` up to time ``t`` in place."""
    h = 1.0 / nsub
    target = int(t * nsub)
    if target > nsub:
        target = nsub
    while target > 0 and target * h > t:
        target -= 1
    while m < target:
        if not _rk4(rhs, q, grid, h, g0 + m * h, delta, p, in_t, in_v, in_off, in_period, u, w):
            return False
        m += 1
    rest = t - m * h
    if rest > 0.0:
        if not _rk4(rhs, q, grid, rest, g0 + m * h, delta, p, in_t, in_v, in_off, in_period, u, w):
            return False
    return True


@numba.njit(types.int64(RHS_TYPE, types.int64, types.float64[::1], types.float64[::1], types.int64,
                        types.float64, types.int64, types.float64, types.float64[::1], types.float64[::1],
                        types.float64[::1], types.int64[::1], types.float64[::1], types.float64[:, ::1]),
            cache=True, nogil=True)
def _flow_points_entry(rhs, q, v, times, npts, g0, nsub, delta, p, in_t, in_v, in_off, in_period, out):
    n = v.shape[0]
    u = np.zeros(max(in_off.shape[0] - 1, 1))
    w = np.empty((5, n))
    grid = np.empty(n)
    return integrate_points(rhs, q, v, times, npts, g0, nsub, delta, p, in_t, in_v, in_off, in_period,
                            u, w, grid, out)


# --------------------------------------------------------------------------
# public API


def _resolve(h, q):
    cm = h if isinstance(h, CompiledModel) else compile_model(h)
    qi = q if isinstance(q, (int, np.integer)) else cm.automaton.mode_index(q)
    return cm, int(qi)


def flow_at_points(h, q, times, v, global_time: float = 0.0, cfg: FlowConfig = FlowConfig()) -> list[np.ndarray]:
    """States reached from ``v`` in mode ``q`` at each of the increasing
    ``times`` in (0, 1].  ``global_time`` is normalised (steps, not model time).
    ``h`` may be an automaton or a :class:`CompiledModel`."""
    cm, qi = _resolve(h, q)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.size == 0:
        return []
    if np.any(times <= 0) or np.any(times > 1) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing in (0, 1]")
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (cm.n,) or not np.all(np.isfinite(v)):
        raise ValueError("v must be a finite state vector of the automaton's dimension")
    out = np.empty((times.size, cm.n))
    m = _flow_points_entry(cm.rhs, qi, v, times, times.size, float(global_time), int(cfg.substeps), cm.delta,
                           cm.params, cm.in_t, cm.in_v, cm.in_off, cm.in_period, out)
    if m < 0:
        raise FlowError(cm.automaton.modes[qi].name, float(global_time) * cm.delta, v)
    return list(out)


def flow(h, q, t: float, v, global_time: float = 0.0, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """State reached after normalised time ``t`` in (0, 1] from ``v`` in mode ``q``."""
    return flow_at_points(h, q, [t], v, global_time, cfg)[0]
