"""Shared helpers: seeded random smooth problems and the golden displayed
matrices encoded as exact formal expressions."""

from __future__ import annotations

import random

from quasiode.coeffs import load_coefficient_set
from quasiode.quasi import SmoothFunction
from quasiode.symbolic import EC_ONE, ExactComplex, formal_expr, make_term
from fractions import Fraction


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def random_coeff_source(rng: random.Random, scale=0.6) -> str:
    """A small smooth expression with bounded magnitude on [0, 3]."""
    picks = [
        lambda c: f"{_fmt(c)}",
        lambda c: f"{_fmt(c)}*sin(x)",
        lambda c: f"{_fmt(c)}*cos(x)",
        lambda c: f"{_fmt(c)}*x",
        lambda c: f"{_fmt(c)}*x^2",
        lambda c: f"({_fmt(c)}+{_fmt(c / 2)}*i)*cos(x)",
    ]
    terms = []
    for _ in range(rng.randint(1, 2)):
        c = rng.uniform(-scale, scale)
        terms.append(rng.choice(picks)(c))
    return "+".join(terms).replace("+-", "-")


def random_problem(seed: int, n: int, interval=(0.0, 2.0)):
    """A random smooth coefficient set plus a smooth test function."""
    rng = random.Random(seed)
    coeffs = {"q0": f"{_fmt(rng.uniform(0.5, 1.1))}+{_fmt(rng.uniform(0.05, 0.25))}*sin(x)"}
    for k in range(n + 1):
        if rng.random() < 0.8:
            coeffs[f"p{k}"] = random_coeff_source(rng)
    for k in range(1, n + 1):
        if rng.random() < 0.8:
            coeffs[f"q{k}"] = random_coeff_source(rng)
    cs = load_coefficient_set({"n": n, "interval": list(interval), "coefficients": coeffs})
    y = SmoothFunction.parse(
        f"sin(x)+{_fmt(rng.uniform(-0.5, 0.5))}*x^2+{_fmt(rng.uniform(-0.5, 0.5))}*cos(2*x)"
    )
    return cs, y


# ---------------------------------------------------------------------------
# the three displayed matrices, hand-encoded entry by entry

def _p(j, deriv=0):
    return (("p", j, deriv), 1)


def _q(j, deriv=0):
    return (("q", j, deriv), 1)


def _one():
    return formal_expr([make_term(EC_ONE)])


def _inv_sqrt():
    return formal_expr([make_term(EC_ONE, s_exp=-1)])


def _center():
    return formal_expr([make_term(ExactComplex.of(0, Fraction(1, 2)), (_p(0),), 0, -1)])


def _phi_over_sqrt(j, sign=1, tilde=False):
    # sign * i * (p_j -+/+ i q_j) / sqrt(2 q0)
    q_coeff = sign if tilde else -sign
    return formal_expr([
        make_term(ExactComplex.of(0, sign), (_p(j),), s_exp=-1),
        make_term(ExactComplex.of(q_coeff), (_q(j),), s_exp=-1),
    ])


def _scalar(re_p=0, im_p=0, sym=None):
    return formal_expr([make_term(ExactComplex.of(re_p, im_p), (sym,))])


def displayed_matrix_exprs(n: int):
    """(row, col) -> exact formal expression of the published explicit matrices."""
    if n == 1:
        return {
            (1, 2): _inv_sqrt(),
            (2, 1): _phi_over_sqrt(1, sign=-1, tilde=True),
            (2, 2): _center(),
            (2, 3): _inv_sqrt(),
            (3, 2): _phi_over_sqrt(1, sign=+1),
        }
    if n == 2:
        return {
            (1, 2): _one(),
            (2, 3): _inv_sqrt(),
            (3, 1): _phi_over_sqrt(2, sign=+1, tilde=True),
            (3, 2): _phi_over_sqrt(1, sign=-1, tilde=True),
            (3, 3): _center(),
            (3, 4): _inv_sqrt(),
            (4, 2): _scalar(0, -2, _p(2)),
            (4, 3): _phi_over_sqrt(1, sign=+1),
            (4, 5): _one(),
            (5, 3): _phi_over_sqrt(2, sign=+1),
        }
    if n == 3:
        q3_plus_3ip3 = formal_expr([
            make_term(EC_ONE, (_q(3),)),
            make_term(ExactComplex.of(0, 3), (_p(3),)),
        ])
        q3_minus_3ip3 = formal_expr([
            make_term(EC_ONE, (_q(3),)),
            make_term(ExactComplex.of(0, -3), (_p(3),)),
        ])
        return {
            (1, 2): _one(),
            (2, 3): _one(),
            (3, 4): _inv_sqrt(),
            (4, 1): _phi_over_sqrt(3, sign=-1, tilde=True),
            (4, 2): _phi_over_sqrt(2, sign=+1, tilde=True),
            (4, 3): _phi_over_sqrt(1, sign=-1, tilde=True),
            (4, 4): _center(),
            (4, 5): _inv_sqrt(),
            (5, 2): q3_plus_3ip3,
            (5, 3): _scalar(0, -2, _p(2)),
            (5, 4): _phi_over_sqrt(1, sign=+1),
            (5, 6): _one(),
            (6, 3): q3_minus_3ip3,
            (6, 4): _phi_over_sqrt(2, sign=+1),
            (6, 7): _one(),
            (7, 4): _phi_over_sqrt(3, sign=+1),
        }
    raise ValueError("displayed matrices exist for n = 1, 2, 3 only")
