import math
import random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from dualpair import expr as ex
from exprgen import corpus, random_expr


def to_sympy(text: str):
    return sympy.sympify(text.replace("^", "**"), locals={"pi": sympy.pi})


# --------------------------------------------------------------------------
# parsing

def test_unary_minus_binds_looser_than_power():
    assert ex.parse("-x^2") == ex.Neg(ex.Pow(ex.Var("x"), ex.Num(2.0)))
    assert ex.evaluate(ex.parse("-x^2"), {"x": 3.0}) == -9.0


def test_power_is_right_associative():
    e = ex.parse("2^3^2")
    assert ex.evaluate(e, {}) == 2.0 ** 9


@pytest.mark.parametrize("text,value", [
    ("1 + 2*3", 7.0),
    ("(1 + 2)*3", 9.0),
    ("8/4/2", 1.0),
    ("2 - 3 - 4", -5.0),
    ("-2^2", -4.0),
    ("(-2)^2", 4.0),
    ("2*-3", -6.0),
    ("sqrt(16) + exp(0) + cos(pi)", 4.0),
    ("1.5e1", 15.0),
])
def test_evaluate_literals(text, value):
    assert ex.evaluate(ex.parse(text), {}) == value


@pytest.mark.parametrize("text,offset", [
    ("sin(", 4),
    ("1 +", 3),
    ("x $ y", 2),
    ("(x", 2),
    ("x y", 2),
    ("tan(x)", 0),
])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ex.ParseError) as info:
        ex.parse(text)
    assert info.value.offset == offset
    assert info.value.expected


def test_parse_error_offset_counts_bytes():
    with pytest.raises(ex.ParseError) as info:
        ex.parse("x + é")
    assert info.value.offset == 4


def test_params_become_constants():
    e = ex.parse("a*x", params=["a"])
    assert isinstance(e.left, ex.Param)
    assert ex.diff(e, "a") == ex.Num(0.0)
    assert ex.evaluate(ex.diff(e, "x"), {"a": 2.5}) == 2.5


# --------------------------------------------------------------------------
# evaluation errors

def test_unbound_name():
    with pytest.raises(ex.UnboundNameError) as info:
        ex.evaluate(ex.parse("x + q"), {"x": 1.0})
    assert info.value.name == "q"


@pytest.mark.parametrize("text,env,culprit", [
    ("1 + sqrt(x)", {"x": -1.0}, "sqrt(x)"),
    ("log(x - 1)", {"x": 1.0}, "log(x - 1)"),
    ("y/x", {"x": 0.0, "y": 1.0}, "y/x"),
    ("x^0.5", {"x": -4.0}, "x^0.5"),
])
def test_domain_error_names_node(text, env, culprit):
    with pytest.raises(ex.DomainError) as info:
        ex.evaluate(ex.parse(text), env)
    assert ex.to_string(info.value.node) == culprit


def test_compiled_matches_tree_evaluator_bitwise():
    names = ("x", "y", "z")
    rng = random.Random(7)
    for text in corpus(60, seed=99):
        e = ex.parse(text)
        f = ex.compile_exprs([e], names)
        for _ in range(5):
            p = [rng.uniform(-2, 2) for _ in names]
            assert f(p)[0] == ex.evaluate(e, dict(zip(names, p)))


def test_compiled_raises_domain_error():
    f = ex.compile_exprs([ex.parse("sqrt(x)")], ["x"])
    with pytest.raises(ex.DomainError):
        f([-1.0])


# --------------------------------------------------------------------------
# printing

def test_printer_round_trip_corpus():
    for text in corpus(100, seed=3):
        e = ex.parse(text)
        assert ex.parse(ex.to_string(e)) == e


@settings(max_examples=150, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_printer_round_trip_property(seed):
    e = ex.parse(random_expr(random.Random(seed), depth=5))
    assert ex.parse(ex.to_string(e)) == e


def test_negative_literal_comes_back_as_negation():
    e = ex.Mul(ex.Num(-2.0), ex.Var("x"))
    back = ex.parse(ex.to_string(e))
    assert back == ex.Mul(ex.Neg(ex.Num(2.0)), ex.Var("x"))
    assert ex.evaluate(back, {"x": 1.5}) == ex.evaluate(e, {"x": 1.5})


# --------------------------------------------------------------------------
# differentiation

def test_simplifying_constructors():
    assert ex.to_string(ex.diff(ex.parse("3*x + 2"), "x")) == "3"
    assert ex.diff(ex.parse("y^2"), "x") == ex.Num(0.0)


def test_derivative_of_variable_exponent_uses_log():
    d = ex.diff(ex.parse("x^y"), "y")
    assert "log" in ex.to_string(d)
    assert math.isclose(ex.evaluate(d, {"x": 2.0, "y": 3.0}), 8.0 * math.log(2.0))


def test_diff_matches_sympy_on_random_corpus():
    rng = random.Random(2024)
    xs = sympy.symbols("x y z")
    for text in corpus(200):
        e = ex.parse(text)
        s = to_sympy(text)
        for v, sv in zip(("x", "y", "z"), xs):
            d = ex.diff(e, v)
            sd = sympy.lambdify(xs, sympy.diff(s, sv), "math")
            p = [rng.uniform(-1.5, 1.5) for _ in range(3)]
            got = ex.evaluate(d, dict(zip(("x", "y", "z"), p)))
            want = float(sd(*p))
            assert abs(got - want) <= 1e-9 * max(1.0, abs(want)), text


def _richardson(f, p, i, h):
    def central(step):
        hi, lo = list(p), list(p)
        hi[i] += step
        lo[i] -= step
        return (f(hi)[0] - f(lo)[0]) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


def test_diff_matches_finite_differences_on_random_corpus():
    """Symbolic vs central differences, relative 1e-6 on 200 expressions."""
    rng = random.Random(11)
    names = ("x", "y", "z")
    worst = 0.0
    for text in corpus(200, seed=777):
        e = ex.parse(text)
        f = ex.compile_exprs([e], names)
        grads = ex.compile_exprs([ex.diff(e, v) for v in names], names)
        p = [rng.uniform(-1.0, 1.0) for _ in names]
        g = grads(p)
        for i in range(3):
            fd = _richardson(f, p, i, 1e-3)
            worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    assert worst <= 1e-6


def test_substitute_and_free_names():
    e = ex.parse("a*sin(x) + y", params=["a"])
    assert ex.free_names(e) == {"a", "x", "y"}
    s = ex.substitute(e, {"x": ex.parse("2*t")})
    assert ex.free_names(s) == {"a", "t", "y"}
