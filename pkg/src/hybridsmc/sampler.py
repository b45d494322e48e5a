"""Trajectory sampling under the stochastic mode-switch approximation.

Each step draws ``J`` uniform time points, simulates the current mode to each
of them, counts for every outgoing guard the points at which it is enabled,
picks a guard with probability proportional to its count and a switch time
uniformly among its enabled points, and finishes the unit interval in the
target mode.  When no guard is enabled at any point the trajectory stays in
its mode for the whole interval.

The robust variant rejects any draw whose resulting state hits one of the
property constants ``C_i`` exactly.

The whole step loop runs in one numba kernel.  Uniform variates come from a
per-trajectory Philox stream and are handed to the kernel in buffers, so the
random numbers consumed depend only on the seed and never on chunking or
thread scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numba
import numpy as np
from numba import types

from .flow import RHS_TYPE, CompiledModel, FlowConfig, FlowError, compile_model, integrate_from_grid, integrate_points
from .model import HybridAutomaton, ModelError

__all__ = [
    "SamplerConfig",
    "Trajectory",
    "SamplerError",
    "TrajectoryRun",
    "make_rng",
    "sample_trajectory",
    "sample_robust_trajectory",
    "empirical_guard_probs",
    "constants_for",
    "dump_trajectory",
]

OK, NEED_RANDOMS, BLOWUP, DEGENERATE = 0, 1, 2, 3
NO_SWITCH = -1


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    J: int = 10
    K: int | None = None  # defaults to the automaton horizon
    flow: FlowConfig = FlowConfig()
    seed: int = 0
    robust: bool = False
    # (variable index, value) pairs; only consulted when robust is set
    constants: tuple[tuple[int, float], ...] = ()
    max_repeats: int = 1000

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be at least 1")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be at least 1")

    def horizon(self, h: HybridAutomaton) -> int:
        return h.horizon if self.K is None else self.K


@dataclass
class Trajectory:
    """Modes and states at steps ``0..K`` plus the transition taken in each
    step (automaton transition index or -1) and its switch time."""

    modes: np.ndarray
    states: np.ndarray
    switches: np.ndarray
    switch_times: np.ndarray
    mode_names: tuple[str, ...]
    seed: tuple[int, int] = (0, 0)
    attempts: int = 0

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def K(self) -> int:
        return len(self.modes) - 1

    def mode_sequence(self) -> list[str]:
        return [self.mode_names[q] for q in self.modes]

    def records(self, variables: Sequence[str]) -> Iterable[dict]:
        for k in range(len(self.modes)):
            rec = {"step": k, "mode": self.mode_names[self.modes[k]]}
            rec.update({v: float(x) for v, x in zip(variables, self.states[k])})
            if k > 0:
                tr = int(self.switches[k - 1])
                rec["switched"] = None if tr == NO_SWITCH else tr
                rec["t_switch"] = None if tr == NO_SWITCH else float(self.switch_times[k - 1])
            yield rec


def make_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for trajectory ``index`` under master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def constants_for(h: HybridAutomaton, pairs: Iterable[tuple[str | int, float]]) -> tuple[tuple[int, float], ...]:
    out = set()
    for var, c in pairs:
        i = var if isinstance(var, int) else h.variables.index(var)
        out.add((int(i), float(c)))
    return tuple(sorted(out))


# --------------------------------------------------------------------------
# kernel


@numba.njit(cache=True, nogil=True)
def _hits(x, c_val, c_off):
    for i in range(x.shape[0]):
        for j in range(c_off[i], c_off[i + 1]):
            if x[i] == c_val[j]:
                return True
    return False


@numba.njit(cache=True, nogil=True)
def _enabled(x, s, box_off, box_lo, box_hi):
    for b in range(box_off[s], box_off[s + 1]):
        inside = True
        for i in range(x.shape[0]):
            if not (box_lo[b, i] < x[i] and x[i] < box_hi[b, i]):
                inside = False
                break
        if inside:
            return True
    return False


_i64, _f64 = types.int64, types.float64
_KERNEL_SIG = types.void(
    RHS_TYPE, _f64[::1], _f64, _f64[::1], _f64[::1], _i64[::1], _f64[::1],  # rhs p delta inputs
    _i64[::1], _i64[::1], _i64[::1], _f64[:, ::1], _f64[:, ::1],  # tr_off tr_target box_off lo hi
    _f64[::1], _f64[::1], _i64,  # init box, q0
    _i64, _i64, _f64[::1], _i64[::1], _i64,  # nsub J c_val c_off max_repeats
    _f64[::1], _i64[::1], _i64[::1], _f64[:, ::1], _i64[::1], _f64[::1],  # U pos/state modes X rec_tr rec_t
)


@numba.njit(_KERNEL_SIG, cache=True, nogil=True)
def _kernel(rhs, p, delta, in_t, in_v, in_off, in_period,
            tr_off, tr_target, box_off, box_lo, box_hi,
            init_lo, init_hi, q0,
            nsub, J, c_val, c_off, max_repeats,
            U, st, modes, X, rec_tr, rec_t):
    # st = [status, k, upos, k_end, attempts, repeats]; k == -1 means v0 not drawn yet
    n = X.shape[1]
    k = st[1]
    upos = st[2]
    k_end = st[3]
    nU = U.shape[0]
    u = np.zeros(max(in_off.shape[0] - 1, 1))
    w = np.empty((5, n))
    grid = np.empty(n)
    V = np.empty((J, n))
    times = np.empty(J)
    nslot = 0
    for q in range(tr_off.shape[0] - 1):
        nslot = max(nslot, tr_off[q + 1] - tr_off[q])
    cnt = np.zeros(max(nslot, 1), dtype=np.int64)
    xs = np.empty(n)

    reps = st[5]
    if k < 0:
        while True:
            if upos + n > nU:
                st[0] = NEED_RANDOMS
                st[2] = upos
                st[5] = reps
                return
            ok = True
            for i in range(n):
                xs[i] = init_lo[i] + U[upos + i] * (init_hi[i] - init_lo[i])
                if not (init_lo[i] < xs[i] and xs[i] < init_hi[i]):
                    ok = False
            upos += n
            st[4] += 1
            if ok and not _hits(xs, c_val, c_off):
                break
            reps += 1
            if reps > max_repeats:
                st[0] = DEGENERATE
                st[1] = -1
                st[2] = upos
                return
        for i in range(n):
            X[0, i] = xs[i]
        modes[0] = q0
        k = 0
        reps = 0

    while k < k_end:
        q = modes[k]
        a, b = tr_off[q], tr_off[q + 1]
        while True:
            if upos + J + 2 > nU:
                st[0] = NEED_RANDOMS
                st[1] = k
                st[2] = upos
                st[5] = reps
                return
            # J times in (0, 1], insertion-sorted
            for j in range(J):
                t = 1.0 - U[upos + j]
                i = j
                while i > 0 and times[i - 1] > t:
                    times[i] = times[i - 1]
                    i -= 1
                times[i] = t
            u_guard = U[upos + J]
            u_point = U[upos + J + 1]
            upos += J + 2
            st[4] += 1
            m = integrate_points(rhs, q, X[k], times, J, float(k), nsub, delta, p,
                                 in_t, in_v, in_off, in_period, u, w, grid, V)
            if m < 0:
                st[0] = BLOWUP
                st[1] = k
                st[2] = upos
                return
            total = 0
            for s in range(a, b):
                c = 0
                for j in range(J):
                    if _enabled(V[j], s, box_off, box_lo, box_hi):
                        c += 1
                cnt[s - a] = c
                total += c
            if total == 0:
                if not integrate_from_grid(rhs, q, grid, m, 1.0, float(k), nsub, delta, p,
                                           in_t, in_v, in_off, in_period, u, w):
                    st[0] = BLOWUP
                    st[1] = k
                    st[2] = upos
                    return
                for i in range(n):
                    xs[i] = grid[i]
                chosen = -1
                qn = q
                tsw = np.nan
            else:
                r = u_guard * total
                acc = 0
                chosen = b - 1
                for s in range(a, b):
                    acc += cnt[s - a]
                    if r < acc:
                        chosen = s
                        break
                c = cnt[chosen - a]
                idx = int(u_point * c)
                if idx >= c:
                    idx = c - 1
                jsel = -1
                for j in range(J):
                    if _enabled(V[j], chosen, box_off, box_lo, box_hi):
                        if idx == 0:
                            jsel = j
                            break
                        idx -= 1
                tsw = times[jsel]
                qn = tr_target[chosen]
                for i in range(n):
                    xs[i] = V[jsel, i]
                if not integrate_from_grid(rhs, qn, xs, 0, 1.0 - tsw, k + tsw, nsub, delta, p,
                                           in_t, in_v, in_off, in_period, u, w):
                    st[0] = BLOWUP
                    st[1] = k
                    st[2] = upos
                    return
            if not _hits(xs, c_val, c_off):
                break
            reps += 1
            if reps > max_repeats:
                st[0] = DEGENERATE
                st[1] = k
                st[2] = upos
                return
        for i in range(n):
            X[k + 1, i] = xs[i]
        modes[k + 1] = qn
        rec_tr[k] = chosen
        rec_t[k] = tsw
        k += 1
        reps = 0
    st[0] = OK
    st[1] = k
    st[2] = upos
    st[5] = 0


# --------------------------------------------------------------------------
# driver


def _constant_tables(n: int, constants: Iterable[tuple[int, float]]):
    per = [[] for _ in range(n)]
    for i, c in constants:
        per[i].append(float(c))
    c_off = np.zeros(n + 1, dtype=np.int64)
    vals = []
    for i in range(n):
        vals += sorted(set(per[i]))
        c_off[i + 1] = len(vals)
    return np.array(vals + [np.nan], dtype=np.float64), c_off


class TrajectoryRun:
    """A trajectory that can be extended step by step; used for on-the-fly
    property checking.  ``advance(k)`` simulates up to step ``k``."""

    def __init__(self, model, cfg: SamplerConfig, rng: np.random.Generator, K: int | None = None,
                 seed: tuple[int, int] = (0, 0), start: tuple[int, Sequence[float]] | None = None):
        self.cm = model if isinstance(model, CompiledModel) else compile_model(model)
        h = self.cm.automaton
        self.cfg = cfg
        self.rng = rng
        self.K = cfg.horizon(h) if K is None else K
        self.seed = seed
        n = h.n
        self.modes = np.zeros(self.K + 1, dtype=np.int64)
        self.X = np.zeros((self.K + 1, n))
        self.rec_tr = np.full(max(self.K, 1), NO_SWITCH, dtype=np.int64)
        self.rec_t = np.full(max(self.K, 1), np.nan)
        consts = cfg.constants if cfg.robust else ()
        self.c_val, self.c_off = _constant_tables(n, consts)
        self._chunk = max(1024, 64 * (cfg.J + 2))
        self.U = rng.random(min(self._chunk, n + self.K * (cfg.J + 2) + 8))
        self.st = np.array([OK, -1, 0, 0, 0, 0], dtype=np.int64)
        if start is not None:
            q, v = start
            self.modes[0] = q
            self.X[0] = v
            self.st[1] = 0

    @property
    def k(self) -> int:
        return int(self.st[1])

    def advance(self, k_end: int) -> int:
        k_end = min(k_end, self.K)
        cm, cfg = self.cm, self.cfg
        self.st[3] = k_end
        while True:
            _kernel(cm.rhs, cm.params, cm.delta, cm.in_t, cm.in_v, cm.in_off, cm.in_period,
                    cm.tr_off, cm.tr_target, cm.box_off, cm.box_lo, cm.box_hi,
                    cm.init_lo, cm.init_hi, cm.q0,
                    cfg.flow.substeps, cfg.J, self.c_val, self.c_off, cfg.max_repeats,
                    self.U, self.st, self.modes, self.X, self.rec_tr, self.rec_t)
            status = self.st[0]
            if status == OK:
                return self.k
            if status == NEED_RANDOMS:
                rest = self.U[self.st[2]:]
                self.U = np.concatenate([rest, self.rng.random(self._chunk)])
                self.st[2] = 0
                continue
            h = cm.automaton
            k = max(self.k, 0)
            if status == BLOWUP:
                raise FlowError(h.modes[self.modes[k]].name, k * h.delta, self.X[k].copy())
            raise SamplerError(f"more than {cfg.max_repeats} consecutive rejected draws at step {self.k}: "
                               "the model keeps hitting a property constant exactly")

    def trajectory(self, length: int | None = None) -> Trajectory:
        k = self.k if length is None else min(length, self.k)
        tr = self.rec_tr[:k]
        mapped = np.where(tr >= 0, self.cm.tr_index[np.maximum(tr, 0)], NO_SWITCH)
        return Trajectory(
            modes=self.modes[:k + 1].copy(),
            states=self.X[:k + 1].copy(),
            switches=mapped,
            switch_times=self.rec_t[:k].copy(),
            mode_names=self.cm.automaton.mode_names,
            seed=self.seed,
            attempts=int(self.st[4]),
        )


def _rng_for(cfg: SamplerConfig, rng, index: int):
    return make_rng(cfg.seed, index) if rng is None else rng


def sample_trajectory(h, cfg: SamplerConfig = SamplerConfig(), rng: np.random.Generator | None = None,
                      index: int = 0) -> Trajectory:
    """Sample one trajectory of length ``K + 1``.  Without an explicit ``rng``
    the stream is derived from ``(cfg.seed, index)``.  Robust rejection is
    applied when ``cfg.robust`` is set."""
    run = TrajectoryRun(h, cfg, _rng_for(cfg, rng, index), seed=(cfg.seed, index))
    run.advance(run.K)
    return run.trajectory()


def sample_robust_trajectory(h, cfg: SamplerConfig, rng: np.random.Generator | None = None,
                             index: int = 0) -> Trajectory:
    if not cfg.robust:
        from dataclasses import replace

        cfg = replace(cfg, robust=True)
    return sample_trajectory(h, cfg, rng, index)


def empirical_guard_probs(h, mode, v, cfg: SamplerConfig = SamplerConfig(), rng: np.random.Generator | None = None,
                          trials: int = 10000) -> dict:
    """Frequencies of each outgoing transition (keyed by automaton transition
    index) being taken in one step from state ``v`` in ``mode``; the key
    ``None`` counts steps with no switch."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    cm = h if isinstance(h, CompiledModel) else compile_model(h)
    a = cm.automaton
    q = mode if isinstance(mode, int) else a.mode_index(mode)
    rng = _rng_for(cfg, rng, 0)
    keys = [i for i, _ in a.outgoing(a.modes[q].name)]
    counts = {i: 0 for i in keys}
    counts[None] = 0
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (a.n,):
        raise ModelError("state has the wrong dimension")
    for _ in range(trials):
        run = TrajectoryRun(cm, cfg, rng, K=1, start=(q, v))
        run.advance(1)
        tr = int(run.trajectory().switches[0])
        counts[None if tr == NO_SWITCH else tr] += 1
    return {key: c / trials for key, c in counts.items()}


def dump_trajectory(traj: Trajectory, variables: Sequence[str], fp: IO[str], index: int | None = None) -> None:
    """Write one JSON line per step."""
    for rec in traj.records(variables):
        if index is not None:
            rec = {"trajectory": index, **rec}
        fp.write(json.dumps(rec) + "\n")
