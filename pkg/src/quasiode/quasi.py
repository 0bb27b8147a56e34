"""Numeric quasi-derivative chains and two-route application of the expression.

For smooth data the expression can be applied two independent ways:

  * 'expanded' instantiates the exact Leibniz expansion of the divergent
    form term by term (this needs classical derivatives of the
    coefficient primitives);
  * 'chain' evaluates the closure relation
    i^(2n+1) [ (y^[2n])' - i (p_n + i q_n) y^(n) ]
    with (y^[2n])' taken by fourth-order central differences of the
    quasi-derivative chain.

Quasi-derivatives above order n are numeric instantiations of the
symbolic chain, i.e. of the matrix recursion itself; no separate
inductive formula is coded, so agreement of the two routes also
exercises the recursion.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import symbolic as sym
from .coeffs import CoefficientSet, eval_coefficient, phi
from .errors import QuasiodeError, SmoothnessError


@dataclass
class SmoothFunction:
    """A closed-form test function with cached symbolic derivatives."""

    ast: ex.Node
    source: str | None = None
    _derivs: list[ex.Node] = field(default_factory=list, repr=False)

    @staticmethod
    def parse(src: str) -> "SmoothFunction":
        return SmoothFunction(ast=ex.parse_expression(src), source=src)

    def derivative_ast(self, order: int) -> ex.Node:
        if not self._derivs:
            self._derivs.append(self.ast)
        while len(self._derivs) <= order:
            self._derivs.append(ex.differentiate(self._derivs[-1], 1))
        return self._derivs[order]

    def deriv(self, x: float, order: int = 0) -> complex:
        return ex.evaluate(self.derivative_ast(order), x)

    def __call__(self, x: float) -> complex:
        return self.deriv(x, 0)


@dataclass(frozen=True)
class QuasiVector:
    """Quasi-derivatives u[j] = y^[j], j = 0..2n, at one point."""

    x: float
    u: np.ndarray


def _check_smoothness(e: sym.FormalExpr, cs: CoefficientSet):
    needed: dict[tuple[str, int], int] = {}
    for t in e.terms:
        for (s, idx, deriv), _ in t.factors:
            key = (s, idx)
            needed[key] = max(needed.get(key, 0), deriv)
    for (s, idx), deriv in sorted(needed.items()):
        c = cs.coefficient(s, idx)
        if deriv > c.smoothness_order:
            raise SmoothnessError(
                f"{s}{idx} must supply derivative order {deriv}, "
                f"but a {c.kind} coefficient has none"
            )


def eval_formal(e: sym.FormalExpr, cs: CoefficientSet, y: SmoothFunction, x: float) -> complex:
    """Instantiate a formal expression at numeric data."""
    cache: dict[tuple[str, int, int], complex] = {}

    def coeff_value(s, idx, deriv):
        key = (s, idx, deriv)
        if key not in cache:
            cache[key] = eval_coefficient(cs.coefficient(s, idx), x, deriv)
        return cache[key]

    q0 = coeff_value("q", 0, 0)
    sqrt2q0 = cmath.sqrt(2 * q0)
    total = 0j
    for t in e.terms:
        v = t.coeff.to_complex()
        if t.q0_exp:
            v *= q0**t.q0_exp
        if t.s_exp:
            v *= sqrt2q0**t.s_exp
        for (s, idx, deriv), exp in t.factors:
            v *= coeff_value(s, idx, deriv) ** exp
        if t.y_deriv is not None:
            v *= y.deriv(x, t.y_deriv)
        total += v
    return total


def quasi_derivatives(cs: CoefficientSet, y: SmoothFunction, x: float) -> QuasiVector:
    """The full chain u[0..2n] at x (off breakpoints, smooth coefficients).

    u[0..n-1] and u[n] come straight from their defining relations;
    u[n+1] from the expanded center-row relation with the square-root
    derivative rewritten through q0'; the higher entries instantiate the
    symbolic chain.
    """
    n = cs.n
    if x in cs.breakpoints:
        raise QuasiodeError(f"quasi-derivative evaluation exactly at breakpoint x={x}")
    u = np.zeros(2 * n + 1, dtype=complex)
    for k in range(n):
        u[k] = y.deriv(x, k)
    q0 = eval_coefficient(cs.q0, x)
    u[n] = cmath.sqrt(2 * q0) * y.deriv(x, n)
    if n >= 1:
        q0p = eval_coefficient(cs.q0, x, 1)
        p0 = eval_coefficient(cs.p[0], x)
        v = q0p * y.deriv(x, n) + 2 * q0 * y.deriv(x, n + 1) - 1j * p0 * y.deriv(x, n)
        for j in range(1, n + 1):
            v -= 1j * (-1) ** j * phi(cs, j, x, conjugate_variant=True) * y.deriv(x, n - j)
        u[n + 1] = v
    if n >= 2:
        chain = sym.quasi_chain(n)
        for order in range(n + 2, 2 * n + 1):
            _check_smoothness(chain[order], cs)
            u[order] = eval_formal(chain[order], cs, y, x)
    return QuasiVector(x=x, u=u)


def chain_stencil_width(cs: CoefficientSet) -> float:
    a, b = cs.interval
    return max(1e-4, 1e-3 * (b - a))


def apply_tau(cs: CoefficientSet, y: SmoothFunction, grid, method: str = "expanded") -> list[complex]:
    """Apply the order-(2n+1) expression to y on a list of points."""
    n = cs.n
    if method == "expanded":
        tau = sym.expand(sym.divergent_form(n))
        _check_smoothness(tau, cs)
        return [eval_formal(tau, cs, y, x) for x in grid]
    if method != "chain":
        raise ValueError(f"unknown method {method!r}")

    a, b = cs.interval
    h = chain_stencil_width(cs)
    i_top = sym.i_power(2 * n + 1).to_complex()
    out = []
    for x in grid:
        if any(abs(x - c) < 2 * h for c in cs.breakpoints):
            raise QuasiodeError(f"grid point x={x} is within 2h={2 * h} of a breakpoint")
        if x - 2 * h < a or x + 2 * h > b:
            raise QuasiodeError(f"chain stencil around x={x} leaves [{a}, {b}]")
        um2 = quasi_derivatives(cs, y, x - 2 * h).u[2 * n]
        um1 = quasi_derivatives(cs, y, x - h).u[2 * n]
        up1 = quasi_derivatives(cs, y, x + h).u[2 * n]
        up2 = quasi_derivatives(cs, y, x + 2 * h).u[2 * n]
        d = (um2 - 8 * um1 + 8 * up1 - up2) / (12 * h)
        out.append(i_top * (d - 1j * phi(cs, n, x) * y.deriv(x, n)))
    return out
