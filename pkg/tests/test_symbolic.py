from fractions import Fraction

import pytest

from quasiode import symbolic as sym
from quasiode.symbolic import (
    EC_I,
    EC_ONE,
    Atom,
    ExactComplex,
    divergent_form,
    expand,
    expr_equal,
    fe_mul,
    fe_sub,
    formal_adjoint,
    formal_derivative,
    formal_expr,
    i_power,
    make_term,
    quasi_chain,
    quasi_tau,
)


def term(re, im, factors=(), s_exp=0, q0_exp=0, y_deriv=None):
    return make_term(ExactComplex.of(re, im), factors, s_exp, q0_exp, y_deriv)


def f(sym_name, idx, deriv=0, exp=1):
    return ((sym_name, idx, deriv), exp)


# ---------------------------------------------------------------------------
# arithmetic and normal form

def test_exact_complex_arithmetic():
    a = ExactComplex.of(Fraction(1, 2), 1)
    b = ExactComplex.of(2, Fraction(-1, 3))
    assert a * b == ExactComplex.of(Fraction(4, 3), Fraction(11, 6))
    assert (a + b - b) == a
    assert a.conjugate().conjugate() == a
    assert i_power(3) == -EC_I and i_power(7) == -EC_I and i_power(4) == EC_ONE


def test_s_square_reduces_to_2q0():
    t = term(1, 0, s_exp=2)
    assert t.s_exp == 0 and t.q0_exp == 1 and t.coeff == ExactComplex.of(2)
    t = term(1, 0, s_exp=-1)
    assert t.s_exp == 1 and t.q0_exp == -1 and t.coeff == ExactComplex.of(Fraction(1, 2))


def test_plain_q0_factor_folds_into_exponent():
    t = term(1, 0, factors=(f("q", 0, 0, 2),), q0_exp=1)
    assert t.q0_exp == 3 and t.factors == ()


def test_canonicalization_merges_and_drops():
    e = formal_expr([term(1, 0, y_deriv=2), term(-1, 0, y_deriv=2), term(0, 1, y_deriv=0)])
    assert len(e) == 1 and e.terms[0].y_deriv == 0


def test_canonicalization_idempotent():
    e = expand(divergent_form(3))
    assert formal_expr(e.terms) == e


# ---------------------------------------------------------------------------
# derivatives

def test_derivative_of_constant_is_zero():
    assert formal_derivative(formal_expr([term(3, 1)])) == sym.EXPR_ZERO


def test_power_rule_on_q0_squared():
    e = formal_expr([term(1, 0, q0_exp=2, y_deriv=0)])
    want = formal_expr([
        term(2, 0, factors=(f("q", 0, 1),), q0_exp=1, y_deriv=0),
        term(1, 0, q0_exp=2, y_deriv=1),
    ])
    assert formal_derivative(e) == want


def test_s_derivative_reproduces_center_relation():
    # s * d(s y^(n)) must equal q0' y^(n) + 2 q0 y^(n+1)
    n = 4
    s_yn = formal_expr([term(1, 0, s_exp=1, y_deriv=n)])
    s = formal_expr([term(1, 0, s_exp=1)])
    got = fe_mul(s, formal_derivative(s_yn))
    want = formal_expr([
        term(1, 0, factors=(f("q", 0, 1),), y_deriv=n),
        term(2, 0, q0_exp=1, y_deriv=n + 1),
    ])
    assert got == want


# ---------------------------------------------------------------------------
# divergent form and expansion

def test_atom_count_is_3n_plus_3():
    for n in range(1, 7):
        assert len(divergent_form(n)) == 3 * n + 3


def test_divergent_form_n1_atoms():
    atoms = set(divergent_form(1))
    minus_i = -EC_I
    assert atoms == {
        Atom(minus_i, ("q", 0), 0, 2, 1),
        Atom(minus_i, ("q", 0), 0, 1, 2),
        Atom(ExactComplex.of(-1), ("p", 0), 0, 1, 1),
        Atom(ExactComplex.of(1), ("p", 1), 1, 0, 0),
        Atom(minus_i, ("q", 1), 0, 1, 0),
        Atom(minus_i, ("q", 1), 0, 0, 1),
    }


def test_leibniz_expansion_example():
    # (q0 y')'' -> q0'' y' + 2 q0' y'' + q0 y'''
    got = expand((Atom(EC_ONE, ("q", 0), 0, 1, 2),))
    want = formal_expr([
        term(1, 0, factors=(f("q", 0, 2),), y_deriv=1),
        term(2, 0, factors=(f("q", 0, 1),), y_deriv=2),
        term(1, 0, q0_exp=1, y_deriv=3),
    ])
    assert got == want


def test_identity_expansion_case():
    # outer order zero leaves the atom untouched
    got = expand((Atom(EC_ONE, ("p", 1), 1, 0, 0),))
    assert got == formal_expr([term(1, 0, factors=(f("p", 1, 1),), y_deriv=0)])


def test_expansion_top_term():
    e = expand(divergent_form(1))
    top = [t for t in e.terms if t.y_deriv == 3]
    assert len(top) == 1
    assert top[0] == term(0, -2, q0_exp=1, y_deriv=3)


@pytest.mark.parametrize("n", range(1, 7))
def test_term_count_sanity(n):
    e = expand(divergent_form(n))
    assert all(t.y_deriv <= 2 * n + 1 for t in e.terms)
    top = [t for t in e.terms if t.y_deriv == 2 * n + 1]
    assert len(top) == 1
    assert top[0].q0_exp == 1 and top[0].factors == ()
    assert top[0].coeff == i_power(1) * (2 * (-1) ** n)


# ---------------------------------------------------------------------------
# the machine-checked main identity

@pytest.mark.parametrize("n", range(1, 6))
def test_main_identity_exact(n):
    report = expr_equal(quasi_tau(n), expand(divergent_form(n)))
    assert report.equal, report.diff_strings()


def _set_others_to_zero(e):
    """Drop every term that carries a symbol other than q0 (and its derivatives)."""
    return formal_expr(t for t in e.terms
                       if all((s, idx) == ("q", 0) for (s, idx, _), _ in t.factors))


def test_quasi_tau_pure_q0_n1():
    # only the leading pair survives: -2i q0 y''' - 3i q0' y'' - i q0'' y'
    got = _set_others_to_zero(quasi_tau(1))
    want = formal_expr([
        term(0, -2, q0_exp=1, y_deriv=3),
        term(0, -3, factors=(f("q", 0, 1),), y_deriv=2),
        term(0, -1, factors=(f("q", 0, 2),), y_deriv=1),
    ])
    assert got == want


@pytest.mark.parametrize("n", range(1, 5))
def test_center_row_relation(n):
    """y^[n+1] must equal the expanded center-row formula:
    (q0 y^(n))' + q0 y^(n+1) - i p0 y^(n) - i sum_j (-1)^j (p_j - i q_j) y^(n-j)."""
    phi0 = [
        Atom(EC_ONE, ("q", 0), 0, n, 1),
        Atom(EC_ONE, ("q", 0), 0, n + 1, 0),
        Atom(-EC_I, ("p", 0), 0, n, 0),
    ]
    tail = []
    for j in range(1, n + 1):
        sign = (-1) ** j
        tail.append(Atom(-EC_I * sign, ("p", j), 0, n - j, 0))
        tail.append(Atom(ExactComplex.of(-sign), ("q", j), 0, n - j, 0))
    want = expand(tuple(phi0 + tail))
    got = quasi_chain(n)[n + 1]
    report = expr_equal(got, want)
    assert report.equal, report.diff_strings()


@pytest.mark.parametrize("n", range(1, 6))
def test_chain_lower_orders(n):
    chain = quasi_chain(n)
    for k in range(n):
        assert chain[k] == formal_expr([term(1, 0, y_deriv=k)])
    assert chain[n] == formal_expr([term(1, 0, s_exp=1, y_deriv=n)])


def test_tau_has_no_root_and_no_negative_q0():
    for n in range(1, 6):
        for t in quasi_tau(n).terms:
            assert t.s_exp == 0 and t.q0_exp >= 0


# ---------------------------------------------------------------------------
# equality reports and the display-typo diff

def test_expr_equal_reflexive():
    e = expand(divergent_form(2))
    assert expr_equal(e, e).equal


def test_expr_equal_detects_p1_typo():
    """The hand-displayed third-order expansion writes +p1*y' where the
    recursion forces +p1'*y; the diff must surface exactly that swap."""
    displayed = (
        Atom(-EC_I, ("q", 0), 0, 0, 2),   # (q0 y)''  [also a slip: should be (q0 y')'']
        Atom(-EC_I, ("q", 0), 0, 2, 1),
        Atom(ExactComplex.of(-1), ("p", 0), 0, 1, 1),
        Atom(-EC_I, ("q", 1), 0, 0, 1),
        Atom(-EC_I, ("q", 1), 0, 1, 0),
        Atom(EC_ONE, ("p", 1), 0, 1, 0),  # the typo: p1 y'
    )
    report = expr_equal(expand(displayed), expand(divergent_form(1)))
    assert not report.equal
    diff = set(report.diff_strings())
    assert "p1*y'" in diff
    assert "-1*p1'*y" in diff


# ---------------------------------------------------------------------------
# formal adjoint

def test_adjoint_is_involution():
    for n in (1, 2, 3):
        atoms = divergent_form(n)
        assert formal_adjoint(formal_adjoint(atoms)) == atoms


def test_adjoint_swaps_leading_atoms():
    n = 2
    atom = Atom(i_power(1) * ((-1) ** n), ("q", 0), 0, n + 1, n)
    swapped = formal_adjoint((atom,))[0]
    assert swapped == Atom(i_power(1) * ((-1) ** n), ("q", 0), 0, n, n + 1)


def test_adjoint_fixes_real_scalar_atom():
    atom = Atom(ExactComplex.of(Fraction(3, 2)), ("p", 1), 1, 0, 0)
    assert formal_adjoint((atom,)) == (atom,)


@pytest.mark.parametrize("n", (1, 2, 3))
def test_formal_self_adjointness(n):
    report = expr_equal(expand(formal_adjoint(divergent_form(n))),
                        expand(divergent_form(n)))
    assert report.equal, report.diff_strings()
