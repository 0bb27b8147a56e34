import cmath

import numpy as np
import pytest

from conftest import random_problem
from quasiode import symbolic as sym
from quasiode.coeffs import load_coefficient_set
from quasiode.errors import QuasiodeError, SmoothnessError
from quasiode.quasi import SmoothFunction, apply_tau, eval_formal, quasi_derivatives


def load(doc):
    return load_coefficient_set(doc)


def test_unit_weight_reduction():
    # q0 = 1/2 makes every weight 1: the chain is the classical derivative chain
    cs = load({"n": 1, "interval": [0, 3], "coefficients": {"q0": "0.5"}})
    y = SmoothFunction.parse("x^2")
    x = 1.3
    u = quasi_derivatives(cs, y, x).u
    assert abs(u[0] - x**2) < 1e-14
    assert abs(u[1] - 2 * x) < 1e-14
    assert abs(u[2] - 2) < 1e-14


def test_center_row_p0_term():
    cs = load({"n": 1, "interval": [0, 3], "coefficients": {"q0": "0.5", "p0": "1"}})
    y = SmoothFunction.parse("x^2")
    x = 0.9
    u = quasi_derivatives(cs, y, x).u
    assert abs(u[2] - (2 - 2j * x)) < 1e-14


def test_center_row_q1_sign_frozen_from_symbolic_oracle():
    """n=1, q0=1/2, q1=1, y=1: the symbolic center-row expansion fixes the
    sign; instantiated numerically it gives u[2] = +1."""
    cs = load({"n": 1, "interval": [0, 2], "coefficients": {"q0": "0.5", "q1": "1"}})
    y = SmoothFunction.parse("1")
    x = 0.7
    oracle = eval_formal(sym.quasi_chain(1)[2], cs, y, x)
    assert abs(oracle - 1.0) < 1e-15  # frozen expected value
    u = quasi_derivatives(cs, y, x).u
    assert abs(u[2] - oracle) < 1e-15


@pytest.mark.parametrize("seed,n", [(31, 1), (32, 2), (33, 3)])
def test_lower_orders_match_classical_derivatives(seed, n):
    cs, y = random_problem(seed, n)
    for x in (0.31, 0.97, 1.64):
        u = quasi_derivatives(cs, y, x).u
        for k in range(n):
            want = y.deriv(x, k)
            assert abs(u[k] - want) <= 1e-12 * max(1.0, abs(want))


@pytest.mark.parametrize("seed,n", [(41, 2), (42, 3)])
def test_full_chain_matches_symbolic_instantiation(seed, n):
    cs, y = random_problem(seed, n)
    chain = sym.quasi_chain(n)
    for x in (0.45, 1.21):
        u = quasi_derivatives(cs, y, x).u
        for order in range(2 * n + 1):
            want = eval_formal(chain[order], cs, y, x)
            assert abs(u[order] - want) <= 1e-11 * max(1.0, abs(want))


def test_reduced_third_order_closed_form():
    # q0 = 1/2, everything else zero: the expression is -i y'''
    cs = load({"n": 1, "interval": [0, 6.5], "coefficients": {"q0": "0.5"}})
    y = SmoothFunction.parse("cos(x)+i*sin(x)")
    xs = [0.5, 2.0, 4.4]
    for method in ("expanded", "chain"):
        values = apply_tau(cs, y, xs, method=method)
        for x, v in zip(xs, values):
            want = -cmath.exp(1j * x)
            assert abs(v - want) <= 1e-8


def test_annihilation_of_low_degree_polynomials():
    cs = load({"n": 2, "interval": [0, 2], "coefficients": {"q0": "0.5"}})
    y = SmoothFunction.parse("1+x")  # degree < n
    for v in apply_tau(cs, y, [0.3, 1.1], method="expanded"):
        assert v == 0


def test_leading_order_probe_n1():
    # with only q0, the expanded route must equal -2i q0 y''' - 3i q0' y'' - i q0'' y'
    cs = load({"n": 1, "interval": [0, 2], "coefficients": {"q0": "0.6+0.2*sin(x)"}})
    y = SmoothFunction.parse("sin(x)+0.3*x^3")
    from quasiode.coeffs import eval_coefficient
    for x, v in zip([0.4, 1.5], apply_tau(cs, y, [0.4, 1.5], method="expanded")):
        q0 = eval_coefficient(cs.q0, x)
        q0p = eval_coefficient(cs.q0, x, 1)
        q0pp = eval_coefficient(cs.q0, x, 2)
        hand = (-2j * q0 * y.deriv(x, 3) - 3j * q0p * y.deriv(x, 2) - 1j * q0pp * y.deriv(x, 1))
        assert abs(v - hand) <= 1e-12 * max(1.0, abs(hand))


@pytest.mark.parametrize("seed,n", [(51, 1), (52, 2), (53, 3)])
def test_two_method_agreement(seed, n):
    cs, y = random_problem(seed, n)
    a, b = cs.interval
    margin = 0.01 * (b - a)
    xs = list(np.linspace(a + margin, b - margin, 101))
    e = apply_tau(cs, y, xs, method="expanded")
    c = apply_tau(cs, y, xs, method="chain")
    scale = max(1.0, max(abs(v) for v in e))
    dev = max(abs(p - q) for p, q in zip(e, c)) / scale
    assert dev <= 1e-6


def test_linearity():
    cs, _ = random_problem(61, 2)
    y1 = SmoothFunction.parse("sin(x)")
    y2 = SmoothFunction.parse("x^3")
    alpha, beta = 0.7 - 0.2j, 1.3 + 0.4j
    combo = SmoothFunction.parse("(0.7-0.2*i)*sin(x)+(1.3+0.4*i)*x^3")
    xs = [0.35, 0.8, 1.55]
    t1 = apply_tau(cs, y1, xs, method="expanded")
    t2 = apply_tau(cs, y2, xs, method="expanded")
    tc = apply_tau(cs, combo, xs, method="expanded")
    for v1, v2, vc in zip(t1, t2, tc):
        want = alpha * v1 + beta * v2
        assert abs(vc - want) <= 1e-10 * max(1.0, abs(want))


def test_expanded_requires_smooth_coefficients():
    cs = load({
        "n": 1, "interval": [0, 2],
        "coefficients": {"q0": "0.5", "q1": {"kind": "steps", "breakpoints": [1.0], "values": [0, 1]}},
    })
    y = SmoothFunction.parse("x^2")
    with pytest.raises(SmoothnessError):
        apply_tau(cs, y, [0.4], method="expanded")


def test_chain_guards_breakpoints_and_bounds():
    cs = load({
        "n": 1, "interval": [0, 2],
        "coefficients": {"q0": "0.5", "q1": {"kind": "steps", "breakpoints": [1.0], "values": [0, 1]}},
    })
    y = SmoothFunction.parse("x^2")
    with pytest.raises(QuasiodeError, match="breakpoint"):
        apply_tau(cs, y, [1.0005], method="chain")
    with pytest.raises(QuasiodeError, match="stencil"):
        apply_tau(cs, y, [0.0001], method="chain")


def test_quasi_derivatives_rejects_breakpoint_evaluation():
    cs = load({
        "n": 1, "interval": [0, 2],
        "coefficients": {"q0": "0.5", "q1": {"kind": "steps", "breakpoints": [1.0], "values": [0, 1]}},
    })
    with pytest.raises(QuasiodeError):
        quasi_derivatives(cs, SmoothFunction.parse("x"), 1.0)
