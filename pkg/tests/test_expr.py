import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridsmc.expr import (
    Binary, Const, ExprDomainError, ExprSyntaxError, Select, Sym, Unary, UnknownIdentifierError,
    contains_select, eval_expr, format_expr, free_symbols, parse_expr,
)

SYMS = {"x1": "var", "k": "param", "eps": "input", "k_s": "param", "u": "var", "u_s": "param"}


def taylor_exp(x, terms=40):
    # exact rational partial sum, independent of libm
    total, term = Fraction(0), Fraction(1)
    for n in range(terms):
        total += term
        term = term * Fraction(x) / (n + 1)
    return float(total)


def test_parse_precedence():
    e = parse_expr("-x1 + 2*k", SYMS)
    assert e == Binary("+", Unary("neg", Sym("x1", "var")), Binary("*", Const(2.0), Sym("k", "param")))


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as err:
        parse_expr("exp(-t)*x1", SYMS)
    assert err.value.name == "t"


def test_cardiac_style_subterm():
    e = parse_expr("tanh(k_s*(u - u_s))", SYMS)
    assert free_symbols(e) == {"k_s", "u", "u_s"}
    assert eval_expr(e, {"k_s": 2.0, "u": 1.0, "u_s": 0.5}) == pytest.approx(math.tanh(1.0))


def test_hyphenated_names():
    syms = {"PER": "var", "CRY": "var", "PER-CRY": "var", "k16": "param"}
    assert free_symbols(parse_expr("k16*PER*CRY", syms)) == {"k16", "PER", "CRY"}
    assert free_symbols(parse_expr("2*PER-CRY", syms)) == {"PER-CRY"}
    assert free_symbols(parse_expr("u-u_s", SYMS)) == {"u", "u_s"}


def test_eval_examples():
    assert eval_expr(Const(3.5), {}) == 3.5
    assert eval_expr(parse_expr("-x1", SYMS), {"x1": 2}) == -2
    assert eval_expr(parse_expr("exp(-1)"), {}) == pytest.approx(taylor_exp(-1), abs=1e-9)
    assert taylor_exp(-1) == pytest.approx(0.367879441, abs=1e-9)


def test_free_symbols():
    assert free_symbols(Const(1.0)) == frozenset()
    assert free_symbols(parse_expr("x1+x1", SYMS)) == {"x1"}


@pytest.mark.parametrize("text", ["1/(x1-x1)", "ln(0)", "ln(-x1)", "sqrt(-x1)", "exp(1000)"])
def test_domain_errors(text):
    with pytest.raises(ExprDomainError):
        eval_expr(parse_expr(text, SYMS), {"x1": 1.0})


@pytest.mark.parametrize("text", ["", "   ", "x1 +", "(x1", "x1 $ 2", "exp(x1, x1)", "min(x1)"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text, SYMS)


def test_select_and_power():
    e = parse_expr("select(x1 - 1, 10, 20)", SYMS)
    assert contains_select(e)
    assert eval_expr(e, {"x1": 1.0}) == 10
    assert eval_expr(e, {"x1": 0.5}) == 20
    assert eval_expr(parse_expr("2^3^2"), {}) == 512
    assert eval_expr(parse_expr("-x1^2", SYMS), {"x1": 3}) == 9


# random ASTs with non-negative constants
names = st.sampled_from(sorted(SYMS))
leaves = st.one_of(
    st.builds(Const, st.floats(0, 1e6, allow_nan=False).map(lambda x: float(round(x, 3)))),
    names.map(lambda n: Sym(n, SYMS[n])),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(["neg", "exp", "ln", "tanh", "sqrt", "abs"]), children),
        st.builds(Binary, st.sampled_from(["+", "-", "*", "/", "pow", "min", "max"]), children, children),
        st.builds(Select, children, children, children),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=400, deadline=None)
@given(trees)
def test_format_parse_round_trip(e):
    text = format_expr(e)
    assert parse_expr(text, SYMS) == e
    # whitespace is not significant
    assert parse_expr(text.replace(" ", ""), SYMS) == e


@settings(max_examples=400, deadline=None)
@given(trees, st.lists(st.floats(-5, 5), min_size=len(SYMS), max_size=len(SYMS)))
def test_eval_total_or_domain_error(e, values):
    env = dict(zip(sorted(SYMS), values))
    try:
        r = eval_expr(e, env)
    except ExprDomainError:
        return
    assert math.isfinite(r)
