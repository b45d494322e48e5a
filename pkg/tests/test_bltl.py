import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixtures import random_formula, random_pair, random_trace
from hybridsmc import bltl as B
from hybridsmc.oracle import brute_force_bltl

A, Bp = B.Prop("A"), B.Prop("B")


def tr(*labels):
    return B.Trace.from_labels([set(x) for x in labels])


def test_parse_examples():
    f = B.parse_bltl("F<=500(![Resting mode])", labels={"Resting mode"})
    assert f == B.Eventually(B.Not(B.Prop("Resting mode")), 500)
    assert B.parse_bltl("G<=2([A])") == B.Always(A, 2)
    c3 = B.parse_bltl("F<=500(G<=1([1.4 <= u]) & F<=500([0.8 <= u] & [u <= 1.1]))", variables={"u"})
    assert B.quantitative_constants(c3) == {("u", 1.4), ("u", 0.8), ("u", 1.1)}
    assert B.parse_bltl("[A] U<=3 [B] | true") == B.Or(B.Until(A, Bp, 3), B.Top(True))


def test_time_bounds():
    assert B.parse_bltl("F<=500([A])", delta=0.1) == B.Eventually(A, 5000)
    assert B.parse_bltl("F<=0.3([A])", delta=0.1) == B.Eventually(A, 3)
    with pytest.raises(B.BltlSyntaxError):
        B.parse_bltl("F<=0.25([A])", delta=0.1)


@pytest.mark.parametrize("text", ["F<=0([A])", "F<=1.5([A])", "F<=2([A]", "[A] &", "", "[Nope]", "[1 <= z]"])
def test_parse_errors(text):
    with pytest.raises(B.BltlSyntaxError):
        B.parse_bltl(text, labels={"A"}, variables={"x"})


def test_format_round_trip_corpus():
    rng = np.random.default_rng(1)
    for _ in range(500):
        f = random_formula(rng, 3)
        assert B.parse_bltl(B.format_bltl(f)) == f


def test_nnf_examples():
    assert B.to_nnf(B.Not(B.Not(A))) == A
    assert B.to_nnf(B.Not(B.Always(A, 3))) == B.Eventually(B.Not(A), 3)
    dual = B.Or(B.Always(B.Not(Bp), 2), B.Until(B.Not(Bp), B.And(B.Not(A), B.Not(Bp)), 2))
    assert B.to_nnf(B.Not(B.Until(A, Bp, 2))) == dual
    assert B.is_nnf(dual) and not B.is_nnf(B.Not(B.Always(A, 3)))


def test_horizon_examples():
    assert B.horizon(A) == 0
    assert B.horizon(B.Eventually(A, 500)) == 500
    nested = B.Eventually(B.And(A, B.Eventually(Bp, 500)), 500)
    assert B.horizon(nested) == 1000
    # position 1000 alone decides the verdict
    base = [set()] * 1001
    with_a = [{"A"}] * 1001
    yes = B.Trace.from_labels(with_a[:1000] + [{"B"}])
    no = B.Trace.from_labels(with_a[:1000] + [set()])
    assert B.check(nested, yes) and not B.check(nested, no)
    assert not B.check(nested, B.Trace.from_labels(base))


def test_check_examples():
    t = tr([], [], ["A"])
    assert B.check(B.Eventually(A, 2), t)
    assert not B.check(B.Always(A, 2), t)
    assert B.check(B.Eventually(A, 1), tr([], ["A"]))
    assert B.check(B.Until(A, Bp, 2), tr(["A"], ["A"], ["B"]))
    with pytest.raises(B.TraceTooShortError):
        B.check(B.Eventually(A, 3), t)


def test_quantitative_atoms_strict():
    t = B.Trace.from_labels([set(), set()], [[1.0], [2.0]], ("x",))
    assert not B.check(B.Cmp("x", 1.0, True), t)
    assert not B.check(B.Cmp("x", 1.0, False), t)
    assert B.check(B.Not(B.Cmp("x", 1.0, True)), t)
    assert B.check(B.Cmp("x", 1.0, False), t, 1)


def test_brute_force_agreement_and_nnf():
    rng = np.random.default_rng(7)
    for _ in range(2000):
        f, t = random_pair(rng)
        want = brute_force_bltl(f, t)
        assert B.check(f, t) == want
        assert B.check(B.to_nnf(f), t) == want
        assert B.is_nnf(B.to_nnf(f))


seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_consistency_at_every_position(seed):
    rng = np.random.default_rng(seed)
    f, t = random_pair(rng)
    for j in range(len(t) - B.horizon(f)):
        assert B.check(f, t, j) != B.check(B.Not(f), t, j)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_monotone_in_bound(seed):
    rng = np.random.default_rng(seed)
    f, _ = random_pair(rng, max_length=6)
    k = int(rng.integers(1, 3))
    t = random_trace(rng, B.horizon(f) + k + 2)
    if B.check(B.Eventually(f, k), t):
        assert B.check(B.Eventually(f, k + 1), t)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_prefix_invariance(seed):
    rng = np.random.default_rng(seed)
    f, t = random_pair(rng)
    K = B.horizon(f)
    tail = random_trace(rng, 5)
    other = B.Trace.from_labels(
        [t.labels_at(i) for i in range(K + 1)] + [tail.labels_at(i) for i in range(5)],
        np.vstack([t.values[:K + 1], tail.values]), ("x",))
    assert B.check(f, t) == B.check(f, other)


@settings(max_examples=300, deadline=None)
@given(seeds)
def test_prefix_evaluation_agrees(seed):
    rng = np.random.default_rng(seed)
    f, t = random_pair(rng)
    full = B.check(f, t)
    for P in range(1, len(t) + 1):
        part = B.Trace(t.modes[:P], t.mode_labels, t.values[:P], t.variables)
        got = B.evaluate_prefix(f, part, len(t))
        assert got is None or got == full
    assert B.evaluate_prefix(f, t, len(t)) == full
