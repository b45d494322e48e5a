import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsmc.flow import FlowConfig, FlowError, flow, flow_at_points
from hybridsmc.model import parse_model


def one_mode(rhs, delta=1.0, extra=""):
    return parse_model(f"""
variables: [x]
modes:
  q0: {{ode: {{x: "{rhs}"}}}}
initial_mode: q0
init: {{box: {{x: [0, 1]}}}}
delta: {delta}
{extra}
""")


DECAY = one_mode("-x")
GROWTH = one_mode("x")


def test_constant_field_exact():
    h = one_mode("1")
    out = flow_at_points(h, "q0", [0.25, 0.75], [0.0])
    # exact up to rounding in the substep sums
    assert [float(o[0]) for o in out] == pytest.approx([0.25, 0.75], abs=1e-12)
    assert flow_at_points(h, "q0", [], [0.0]) == []


def test_exponentials():
    assert flow(DECAY, "q0", 1.0, [1.0])[0] == pytest.approx(math.exp(-1), abs=1e-6)
    assert flow(GROWTH, "q0", 1.0, [1.0])[0] == pytest.approx(math.e, abs=1e-6)
    eps = 1e-7
    a, b = flow_at_points(DECAY, "q0", [0.5, 1 - eps], [1.0])
    assert a[0] == pytest.approx(math.exp(-0.5), abs=1e-6)
    assert b[0] == pytest.approx(math.exp(-(1 - eps)), abs=1e-6)


def test_delta_scales_time():
    h = one_mode("-x", delta=0.1)
    assert flow(h, 0, 1.0, [1.0])[0] == pytest.approx(math.exp(-0.1), abs=1e-9)


def test_semigroup():
    cfg = FlowConfig(100)
    one = flow(DECAY, 0, 0.5, flow(DECAY, 0, 0.5, [1.0], cfg=cfg), cfg=cfg)
    assert one[0] == pytest.approx(flow(DECAY, 0, 1.0, [1.0], cfg=cfg)[0], abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.001, 1.0), min_size=1, max_size=6, unique=True), st.floats(-3, 3))
def test_points_match_pointwise(times, v):
    times = sorted(times)
    h = one_mode("-x + 0.5*x^2 - 0.1")
    many = flow_at_points(h, 0, times, [v])
    for t, x in zip(times, many):
        assert x[0] == pytest.approx(flow(h, 0, t, [v])[0], rel=1e-12, abs=1e-12)


def test_rk4_order():
    errs = [abs(flow(DECAY, 0, 1.0, [1.0], cfg=FlowConfig(n))[0] - math.exp(-1)) for n in (2, 4, 8)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 8 <= coarse / fine <= 32


def test_blow_up_and_bad_input():
    h = one_mode("x^2")
    with pytest.raises(FlowError):
        flow(h, 0, 1.0, [1e7])
    with pytest.raises(ValueError):
        flow(DECAY, 0, 1.5, [1.0])
    with pytest.raises(ValueError):
        flow(DECAY, 0, 0.5, [np.nan])
    with pytest.raises(ValueError):
        FlowConfig(0)


def test_inputs_and_params():
    h = one_mode("k*eps", extra="parameters: {k: 2}\ninputs: {eps: {schedule: [[0, 1], [0.5, 0]]}}")
    # input held at its value from each substep start
    x = flow(h, 0, 1.0, [0.0], cfg=FlowConfig(10))[0]
    assert x == pytest.approx(1.0, abs=1e-12)
    assert flow(h, 0, 0.5, [0.0], global_time=1.0)[0] == pytest.approx(0.0)
