"""Sequential hypothesis test for ``Pr(psi) = 1`` against ``Pr(psi) < 1 - delta``.

Samples are drawn until one violates the property (decide H1) or ``N``
consecutive samples satisfy it (decide H0), where ``N`` is the smallest
integer with ``(1 - delta)^N <= alpha``.  Accepting H0 when H1 holds therefore
has probability at most ``alpha``; H1 is only returned with a concrete
violating trajectory, so it is never returned when the property holds surely.

Samples are indexed; each index has its own random stream.  With several
threads the samples are still consumed in index order and the lowest
violating index decides, so the verdict does not depend on scheduling.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import bltl as B
from .flow import FlowError, compile_model
from .model import HybridAutomaton
from .sampler import SamplerConfig, SamplerError, Trajectory, TrajectoryRun, constants_for, make_rng

__all__ = [
    "H0",
    "H1",
    "INCONCLUSIVE",
    "SmcConfig",
    "Verdict",
    "sample_size",
    "sequential_test",
    "run_smc",
    "check_sample",
    "calibration_report",
]

H0, H1, INCONCLUSIVE = "H0", "H1", "inconclusive"


@dataclass(frozen=True)
class SmcConfig:
    delta: float = 0.01
    alpha: float = 0.01
    seed: int = 0
    threads: int = 1
    on_the_fly: bool = True

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")


@dataclass
class Verdict:
    decision: str
    samples: int
    N: int
    counterexample: Trajectory | None = None
    counterexample_index: int | None = None
    wall_clock: float = 0.0
    log: list[bool] = field(default_factory=list)
    sample_seconds: list[float] = field(default_factory=list)
    error: str | None = None
    horizon: int = 0

    @property
    def holds(self) -> bool | None:
        return {H0: True, H1: False}.get(self.decision)


def sample_size(delta: float, alpha: float) -> int:
    """Smallest ``N`` with ``(1 - delta)^N <= alpha``."""
    if not (0 < delta < 1 and 0 < alpha < 1):
        raise ValueError("delta and alpha must lie in (0, 1)")
    ratio = math.log(alpha) / math.log1p(-delta)
    n = math.ceil(ratio)
    # guard against the quotient rounding just above an exact integer
    if n > 1 and (1 - delta) ** (n - 1) <= alpha:
        n -= 1
    return max(1, n)


class _SampleFailure(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def sequential_test(sample: Callable[[int], bool], N: int, threads: int = 1,
                    on_result: Callable[[int, object], None] | None = None):
    """Run the test on ``sample(i)`` for ``i = 0, 1, ...``.

    Returns ``(decision, samples, first_bad_index, log, error)``; samples
    count the satisfying samples plus the deciding one.  ``sample`` may raise
    to signal a model failure, which makes the outcome inconclusive.
    ``on_result(i, result)`` sees every consumed sample in index order."""
    log: list[bool] = []

    def outcome(i, result):
        if on_result is not None:
            on_result(i, result)
        if isinstance(result, BaseException):
            return INCONCLUSIVE, i + 1, i, log, str(result)
        log.append(bool(result))
        if not result:
            return H1, i + 1, i, log, None
        return None

    def safe(i):
        try:
            return sample(i)
        except (FlowError, SamplerError, _SampleFailure) as err:
            return err

    if threads <= 1:
        for i in range(N):
            done = outcome(i, safe(i))
            if done:
                return done
        return H0, N, None, log, None

    window = 2 * threads
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending = {}
        nxt = 0
        try:
            for i in range(N):
                while nxt < N and nxt < i + window:
                    pending[nxt] = pool.submit(safe, nxt)
                    nxt += 1
                done = outcome(i, pending.pop(i).result())
                if done:
                    return done
            return H0, N, None, log, None
        finally:
            for fut in pending.values():
                fut.cancel()


def _chunks(total: int, first: int = 64):
    p = min(first, total)
    while True:
        yield p
        if p >= total:
            return
        p = min(2 * p, total)


def check_sample(model, psi: B.Formula, cfg: SamplerConfig, index: int, K: int, on_the_fly: bool = True):
    """Simulate sample ``index`` just far enough to decide ``psi``.

    Returns ``(satisfied, run)``."""
    cm = model if not isinstance(model, HybridAutomaton) else compile_model(model)
    h = cm.automaton
    run = TrajectoryRun(cm, cfg, make_rng(cfg.seed, index), K=K, seed=(cfg.seed, index))
    labels = tuple(m.labels for m in h.modes)
    plan = _chunks(K + 1) if on_the_fly else [K + 1]
    for P in plan:
        run.advance(P - 1)
        trace = B.Trace(run.modes[:P], labels, run.X[:P], h.variables)
        result = B.evaluate_prefix(psi, trace, K + 1)
        if result is not None:
            return result, run
    raise AssertionError("a complete trace always decides the formula")


def _sampler_for(h: HybridAutomaton, psi: B.Formula, scfg: SamplerConfig, seed: int) -> SamplerConfig:
    consts = B.quantitative_constants(psi)
    robust = scfg.robust or bool(consts)
    merged = tuple(sorted(set(scfg.constants) | set(constants_for(h, consts))))
    return replace(scfg, seed=seed, robust=robust, constants=merged)


def run_smc(h: HybridAutomaton, psi: B.Formula, cfg: SmcConfig = SmcConfig(),
            scfg: SamplerConfig = SamplerConfig(),
            on_sample: Callable[[int, bool, Trajectory], None] | None = None) -> Verdict:
    """Decide whether ``psi`` holds with probability 1.  Trajectories are
    sampled up to the formula's horizon; the robust sampler is used whenever
    the formula has quantitative atoms.

    ``on_sample(i, satisfied, trajectory)`` is called in index order for each
    sample the test consumed, with the prefix that was simulated."""
    K = B.horizon(psi)
    limit = scfg.horizon(h)
    if K > limit:
        raise ValueError(f"property horizon {K} exceeds the trajectory bound K={limit}")
    scfg = _sampler_for(h, psi, scfg, cfg.seed)
    cm = compile_model(h)
    N = sample_size(cfg.delta, cfg.alpha)
    timings: list[float] = []
    runs: dict = {}

    def sample(i):
        t0 = time.perf_counter()
        ok, run = check_sample(cm, psi, scfg, i, K, cfg.on_the_fly)
        timings.append(time.perf_counter() - t0)
        if on_sample is not None:
            runs[i] = run
        return ok

    def consumed(i, result):
        run = runs.pop(i, None)
        if on_sample is not None and run is not None and not isinstance(result, BaseException):
            on_sample(i, bool(result), run.trajectory())

    start = time.perf_counter()
    decision, samples, bad, log, error = sequential_test(sample, N, cfg.threads, consumed)
    verdict = Verdict(decision, samples, N, log=log, error=error, horizon=K, sample_seconds=timings)
    if decision == H1:
        # replay the violating sample in full from its seed
        run = TrajectoryRun(cm, scfg, make_rng(scfg.seed, bad), K=K, seed=(scfg.seed, bad))
        run.advance(K)
        traj = run.trajectory()
        if B.check(psi, B.Trace.from_trajectory(traj, h)):
            raise RuntimeError("replayed counterexample satisfies the property")
        verdict.counterexample = traj
        verdict.counterexample_index = bad
    verdict.wall_clock = time.perf_counter() - start
    return verdict


def calibration_report(cfg: SmcConfig, p: float, repetitions: int = 1000) -> dict:
    """Run the test ``repetitions`` times against a synthetic source whose
    samples satisfy the property independently with probability ``p``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    N = sample_size(cfg.delta, cfg.alpha)
    decisions = {H0: 0, H1: 0}
    stops = []
    for rep in range(repetitions):
        rng = make_rng(cfg.seed, rep)
        draws = iter(())

        def source(i):
            nonlocal draws
            if i % 256 == 0:
                draws = iter(rng.random(256))
            return next(draws) < p

        decision, samples, _, _, _ = sequential_test(source, N)
        decisions[decision] += 1
        stops.append(samples)
    h0_rate = decisions[H0] / repetitions
    expected = p ** N
    sigma = math.sqrt(expected * (1 - expected) / repetitions)
    return {
        "p": p,
        "delta": cfg.delta,
        "alpha": cfg.alpha,
        "N": N,
        "repetitions": repetitions,
        "H0": decisions[H0],
        "H1": decisions[H1],
        "h0_rate": h0_rate,
        "expected_h0_rate": expected,
        "sigma": sigma,
        "false_negatives": decisions[H1] if p == 1 else None,
        "median_stop": float(np.median(stops)),
    }
