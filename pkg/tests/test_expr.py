import random

import pytest

from quasiode import expr as ex
from quasiode.errors import EvaluationError, ParseError


def ev(src, x=0.0):
    return ex.evaluate(ex.parse_expression(src), x)


def test_constant_literal():
    node = ex.parse_expression("0.5")
    assert node == ex.Const(0.5)


def test_polynomial_evaluation():
    assert ev("x^2+1", 2.0) == 5


def test_unknown_identifier_with_offset():
    with pytest.raises(ParseError) as err:
        ex.parse_expression("2*q")
    assert err.value.offset == 2


def test_empty_source_rejected():
    with pytest.raises(ParseError):
        ex.parse_expression("   ")


def test_power_binds_tighter_than_times():
    assert ev("2*x^2", 3.0) == 18
    assert ev("-x^2", 2.0) == -4


def test_imaginary_unit_and_functions():
    assert ev("i*i") == -1
    assert abs(ev("sin(x)^2+cos(x)^2", 0.731) - 1) < 1e-15
    assert ev("sqrt(4)") == 2


def test_negative_exponent_forms():
    assert ev("x^-2", 2.0) == 0.25
    assert ev("x^(-2)", 2.0) == 0.25


def test_scientific_notation():
    assert ev("1e-3") == 1e-3
    assert ev("2.5E+2") == 250


def test_syntax_errors():
    for bad in ("1+", "sin(", "(x", "x^y", "3..5"):
        with pytest.raises(ParseError):
            ex.parse_expression(bad)


def test_division_by_zero_raises():
    with pytest.raises(EvaluationError):
        ev("1/x", 0.0)


def test_overflow_raises():
    with pytest.raises(EvaluationError):
        ev("exp(x)", 1e6)


def test_derivative_of_square():
    d = ex.differentiate(ex.parse_expression("x^2"))
    assert d == ex.Binary("*", ex.Const(2), ex.X)


def test_derivative_of_sin_is_cos():
    d = ex.differentiate(ex.parse_expression("sin(x)"))
    assert d == ex.parse_expression("cos(x)")


def test_second_derivative_of_exp_at_zero():
    d2 = ex.differentiate(ex.parse_expression("exp(x)"), 2)
    assert ex.evaluate(d2, 0.0) == 1


def test_order_zero_is_identity():
    node = ex.parse_expression("sin(x)*x^3")
    assert ex.differentiate(node, 0) is node


def test_derivative_cap():
    node = ex.parse_expression("x")
    with pytest.raises(ValueError):
        ex.differentiate(node, 13)
    ex.differentiate(node, 13, cap=20)  # lifted cap works


SAMPLE_SOURCES = [
    "x^3-2*x+1",
    "sin(x)*cos(x)",
    "exp(0.3*x)+x^2",
    "sqrt(x+2)",
    "(1+2*i)*sin(x)+x",
    "cos(2*x)/(x+3)",
]


@pytest.mark.parametrize("src", SAMPLE_SOURCES)
def test_derivative_matches_central_difference(src):
    # Richardson-extrapolated central differences at 100 random points
    node = ex.parse_expression(src)
    d = ex.differentiate(node)
    rng = random.Random(1234)
    for _ in range(100):
        x = rng.uniform(0.1, 2.5)
        h = 1e-5 * max(1.0, abs(x))
        d1 = (ex.evaluate(node, x + h) - ex.evaluate(node, x - h)) / (2 * h)
        d2 = (ex.evaluate(node, x + h / 2) - ex.evaluate(node, x - h / 2)) / h
        numeric = (4 * d2 - d1) / 3
        symbolic = ex.evaluate(d, x)
        assert abs(numeric - symbolic) <= 1e-6 * max(1.0, abs(symbolic))


@pytest.mark.parametrize("src", SAMPLE_SOURCES)
def test_source_round_trip(src):
    node = ex.parse_expression(src)
    again = ex.parse_expression(ex.to_source(node))
    assert again == node


def test_derivative_closure_depth():
    # repeatedly differentiating stays inside the AST node set
    node = ex.parse_expression("sin(x)*exp(0.5*x)/(x+2)")
    for order in range(1, 9):
        node = ex.differentiate(node)
        assert isinstance(node, (ex.Const, ex.Var, ex.Unary, ex.Binary, ex.Power))
