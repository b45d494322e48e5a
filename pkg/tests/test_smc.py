import pytest
from hypothesis import given
from hypothesis import strategies as st

from fixtures import SYMMETRIC
from hybridsmc import bltl as B
from hybridsmc.model import parse_model
from hybridsmc.sampler import SamplerConfig, make_rng
from hybridsmc.smc import (
    H0, H1, INCONCLUSIVE, SmcConfig, calibration_report, run_smc, sample_size, sequential_test,
)


def toy(guard):
    return parse_model(f"""
variables: [x]
modes:
  S: {{labels: [S], ode: {{x: "1"}}}}
  T: {{labels: [T], ode: {{x: "0"}}}}
initial_mode: S
transitions:
  - {{from: S, to: T, guard: "{guard}"}}
init: {{box: {{x: [0, 0.1]}}}}
horizon: 10
""")


def test_sample_size_examples():
    assert sample_size(0.01, 0.01) == 459
    assert sample_size(0.001, 0.01) == 4603
    assert sample_size(0.5, 0.5) == 1
    for bad in ((0, 0.1), (1, 0.1), (0.1, 0), (0.1, 1.5)):
        with pytest.raises(ValueError):
            sample_size(*bad)


@given(st.floats(1e-4, 0.9), st.floats(1e-4, 0.9))
def test_sample_size_is_minimal(delta, alpha):
    n = sample_size(delta, alpha)
    assert (1 - delta) ** n <= alpha * (1 + 1e-12)
    assert n == 1 or (1 - delta) ** (n - 1) > alpha * (1 - 1e-12)


@given(st.floats(1e-3, 0.5), st.floats(1e-3, 0.5), st.floats(1e-3, 0.5))
def test_sample_size_monotone(d1, d2, alpha):
    lo, hi = sorted((d1, d2))
    assert sample_size(lo, alpha) >= sample_size(hi, alpha)
    assert sample_size(lo, alpha / 2) >= sample_size(lo, alpha)


def test_toy_always_true():
    h = toy("0 < x && x < 5")
    v = run_smc(h, B.parse_bltl("F<=2([T])", labels=h.labels), SmcConfig(seed=1))
    assert (v.decision, v.samples, v.N, v.holds) == (H0, 459, 459, True)
    assert v.counterexample is None and all(v.log)


def test_toy_unreachable():
    h = toy("10 < x")
    psi = B.parse_bltl("F<=5([T])", labels=h.labels)
    v = run_smc(h, psi, SmcConfig(seed=1))
    assert (v.decision, v.samples, v.holds) == (H1, 1, False)
    assert v.counterexample.mode_sequence() == ["S"] * 6
    assert not B.check(psi, B.Trace.from_trajectory(v.counterexample, h))


def test_counterexample_replays_across_threads():
    h = SYMMETRIC.automaton()
    psi = B.parse_bltl("F<=1([L])", labels=h.labels)
    ref = run_smc(h, psi, SmcConfig(seed=3))
    assert ref.decision == H1
    assert ref.samples == ref.counterexample_index + 1
    assert ref.log == [True] * (ref.samples - 1) + [False]
    for threads in (2, 8):
        v = run_smc(h, psi, SmcConfig(seed=3, threads=threads))
        assert (v.decision, v.samples) == (ref.decision, ref.samples)
        assert v.counterexample.mode_sequence() == ref.counterexample.mode_sequence()
        assert v.counterexample.states.tobytes() == ref.counterexample.states.tobytes()


def test_on_the_fly_matches_full_traces():
    h = SYMMETRIC.automaton()
    psi = B.parse_bltl("G<=3([S] | [R])", labels=h.labels)
    a = run_smc(h, psi, SmcConfig(seed=5), SamplerConfig(K=5))
    b = run_smc(h, psi, SmcConfig(seed=5, on_the_fly=False), SamplerConfig(K=5))
    assert (a.decision, a.samples, a.log) == (b.decision, b.samples, b.log)


def test_horizon_beyond_k_rejected():
    h = toy("0 < x")
    with pytest.raises(ValueError):
        run_smc(h, B.parse_bltl("F<=11([T])"), SmcConfig())


def test_blow_up_is_inconclusive():
    h = parse_model("""
variables: [x]
modes: {S: {labels: [S], ode: {x: "x^3"}}}
initial_mode: S
init: {box: {x: [10, 11]}}
horizon: 5
""")
    v = run_smc(h, B.parse_bltl("G<=5([S])"), SmcConfig())
    assert v.decision == INCONCLUSIVE and v.holds is None
    assert v.samples == 1 and "blew up" in v.error


def test_sequential_test_order_under_threads():
    bad = {37, 90}
    for threads in (1, 3, 8):
        d, n, first, log, err = sequential_test(lambda i: i not in bad, 459, threads)
        assert (d, n, first, err) == (H1, 38, 37, None)


def test_calibration_examples():
    cfg = SmcConfig(seed=2)
    r = calibration_report(cfg, 1.0, 200)
    assert r["H1"] == 0 and r["false_negatives"] == 0
    r = calibration_report(cfg, 0.0, 50)
    assert r["H1"] == 50 and r["median_stop"] == 1
    r = calibration_report(cfg, 0.5, 500)
    assert r["H1"] == 500 and r["median_stop"] == pytest.approx(2, abs=1)
    with pytest.raises(ValueError):
        calibration_report(cfg, 1.5, 1)


def test_bernoulli_two_delta():
    delta, alpha = 0.01, 0.01
    N = sample_size(delta, alpha)
    p = 1 - 2 * delta
    h0 = 0
    for rep in range(500):
        draws = make_rng(99, rep).random(N)
        d, *_ = sequential_test(lambda i: draws[i] < p, N)
        h0 += d == H0
    assert p ** N < alpha
    assert h0 / 500 <= alpha + 0.02


def test_config_validation():
    for kw in ({"delta": 0}, {"alpha": 1}, {"threads": 0}):
        with pytest.raises(ValueError):
            SmcConfig(**kw)
