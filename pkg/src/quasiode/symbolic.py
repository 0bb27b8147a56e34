"""Exact formal-expression engine for the regularization identity.

Two independent pipelines produce the same differential expression of
order 2n+1 and are compared term by term in exact Gaussian-rational
arithmetic:

  * ``divergent_form`` emits the expression as a list of nested-derivative
    atoms c * (w y^(a))^(b) and ``expand`` applies the Leibniz rule;
  * ``quasi_tau`` runs the quasi-derivative recursion defined by the
    system matrix pattern and normalizes the result.

The auxiliary square root sqrt(2 q0) is carried as a symbol ``s`` with
the rewrite rules s^2 -> 2 q0 and s' -> q0' / s; a completed expansion
must come out free of ``s`` and free of negative q0 powers, which is
asserted.

Symbols are treated as formal smooth functions; the identity is purely
algebraic, so it transfers verbatim to the distributional setting in
which the primitives are merely locally integrable.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

from . import shinzettl as sz

VERIFY_CAP_DEFAULT = 5


# ---------------------------------------------------------------------------
# exact complex rationals

@dataclass(frozen=True)
class ExactComplex:
    """Gaussian rational: re + im*i with arbitrary-precision rational parts."""

    re: Fraction
    im: Fraction

    @staticmethod
    def of(re=0, im=0) -> "ExactComplex":
        return ExactComplex(Fraction(re), Fraction(im))

    def __add__(self, other):
        return ExactComplex(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        return ExactComplex(self.re - other.re, self.im - other.im)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return ExactComplex(self.re * other, self.im * other)
        return ExactComplex(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def conjugate(self) -> "ExactComplex":
        return ExactComplex(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        im = self.im
        imtext = "i" if im == 1 else ("-i" if im == -1 else f"{im}i")
        if self.re == 0:
            return imtext
        sep = "+" if not imtext.startswith("-") else ""
        return f"{self.re}{sep}{imtext}"


EC_ZERO = ExactComplex.of(0)
EC_ONE = ExactComplex.of(1)
EC_I = ExactComplex.of(0, 1)


def i_power(m: int) -> ExactComplex:
    """i**m for any integer m."""
    return (EC_ONE, EC_I, -EC_ONE, -EC_I)[m % 4]


# ---------------------------------------------------------------------------
# terms and expressions

# A factor key is (sym, index, deriv) with sym in {'p', 'q'}; the plain
# q0 power (deriv 0) is kept in the dedicated q0_exp slot instead.
FactorKey = tuple[str, int, int]


@dataclass(frozen=True)
class FormalTerm:
    coeff: ExactComplex
    factors: tuple[tuple[FactorKey, int], ...]  # sorted ((sym,idx,deriv), exponent)
    s_exp: int  # 0 or 1 after normalization
    q0_exp: int  # may be negative in intermediates only
    y_deriv: int | None  # None for scalar (coefficient-only) terms

    def signature(self):
        return (-1 if self.y_deriv is None else self.y_deriv, self.factors, self.s_exp, self.q0_exp)

    def __str__(self):
        parts = []
        c = self.coeff
        if c == EC_ONE:
            pass
        elif c == -EC_ONE:
            parts.append("-1")
        else:
            text = str(c)
            parts.append(f"({text})" if ("+" in text[1:] or "-" in text[1:]) else text)
        if self.q0_exp:
            parts.append("q0" if self.q0_exp == 1 else f"q0^{self.q0_exp}")
        if self.s_exp:
            parts.append("s")
        for (sym, idx, deriv), e in self.factors:
            name = f"{sym}{idx}" + _primes(deriv)
            parts.append(name if e == 1 else f"{name}^{e}")
        if self.y_deriv is not None:
            parts.append("y" + _primes(self.y_deriv))
        if not parts:
            parts.append("1")
        return "*".join(parts)


def _primes(order: int) -> str:
    return "'" * order if order <= 3 else f"^({order})"


def make_term(coeff: ExactComplex, factors=(), s_exp=0, q0_exp=0, y_deriv=None) -> FormalTerm:
    """Normalize a raw term: merge factors, fold plain q0 into q0_exp,
    reduce s powers via s^2 = 2 q0."""
    merged: dict[FactorKey, int] = {}
    for key, e in factors:
        if e == 0:
            continue
        if key == ("q", 0, 0):
            q0_exp += e
            continue
        merged[key] = merged.get(key, 0) + e
        if merged[key] == 0:
            del merged[key]
    m, r = divmod(s_exp, 2)
    if m:
        coeff = coeff * (Fraction(2) ** m)
        q0_exp += m
    return FormalTerm(
        coeff=coeff,
        factors=tuple(sorted(merged.items())),
        s_exp=r,
        q0_exp=q0_exp,
        y_deriv=y_deriv,
    )


@dataclass(frozen=True)
class FormalExpr:
    """Canonical sorted sum of terms with distinct signatures."""

    terms: tuple[FormalTerm, ...]

    def __str__(self):
        if not self.terms:
            return "0"
        out = []
        for t in self.terms:
            text = str(t)
            if out and not text.startswith("-"):
                out.append("+")
            out.append(text)
        return " ".join(out)

    def __len__(self):
        return len(self.terms)


def formal_expr(terms) -> FormalExpr:
    acc: dict[tuple, tuple[ExactComplex, FormalTerm]] = {}
    for t in terms:
        key = t.signature()
        if key in acc:
            acc[key] = (acc[key][0] + t.coeff, acc[key][1])
        else:
            acc[key] = (t.coeff, t)
    out = []
    for key in sorted(acc):
        coeff, proto = acc[key]
        if not coeff.is_zero():
            out.append(FormalTerm(coeff, proto.factors, proto.s_exp, proto.q0_exp, proto.y_deriv))
    return FormalExpr(tuple(out))


EXPR_ZERO = formal_expr(())


def fe_add(a: FormalExpr, b: FormalExpr) -> FormalExpr:
    return formal_expr(a.terms + b.terms)


def fe_sub(a: FormalExpr, b: FormalExpr) -> FormalExpr:
    return formal_expr(a.terms + tuple(
        FormalTerm(-t.coeff, t.factors, t.s_exp, t.q0_exp, t.y_deriv) for t in b.terms))


def fe_scale(a: FormalExpr, c: ExactComplex) -> FormalExpr:
    if c.is_zero():
        return EXPR_ZERO
    return formal_expr(FormalTerm(t.coeff * c, t.factors, t.s_exp, t.q0_exp, t.y_deriv) for t in a.terms)


def _term_mul(t1: FormalTerm, t2: FormalTerm) -> FormalTerm:
    if t1.y_deriv is not None and t2.y_deriv is not None:
        raise ValueError("product of two y-carrying terms is not defined here")
    y = t1.y_deriv if t1.y_deriv is not None else t2.y_deriv
    return make_term(
        t1.coeff * t2.coeff,
        t1.factors + t2.factors,
        t1.s_exp + t2.s_exp,
        t1.q0_exp + t2.q0_exp,
        y,
    )


def fe_mul(a: FormalExpr, b: FormalExpr) -> FormalExpr:
    return formal_expr(_term_mul(t1, t2) for t1 in a.terms for t2 in b.terms)


def _term_derivative(t: FormalTerm):
    """Product rule over factors, the q0 power, the s power and y^(b)."""
    out = []
    # classical factors: d/dx of w^(d)^e gives e * w^(d)^(e-1) * w^(d+1)
    for pos, (key, e) in enumerate(t.factors):
        sym, idx, deriv = key
        rest = t.factors[:pos] + ((key, e - 1),) + t.factors[pos + 1:]
        bumped = rest + (((sym, idx, deriv + 1), 1),)
        out.append(make_term(t.coeff * e, bumped, t.s_exp, t.q0_exp, t.y_deriv))
    if t.q0_exp:
        out.append(make_term(
            t.coeff * t.q0_exp,
            t.factors + ((("q", 0, 1), 1),),
            t.s_exp,
            t.q0_exp - 1,
            t.y_deriv,
        ))
    if t.s_exp:
        # s' = q0'/s, so the s power drops by two before renormalization
        out.append(make_term(
            t.coeff * t.s_exp,
            t.factors + ((("q", 0, 1), 1),),
            t.s_exp - 2,
            t.q0_exp,
            t.y_deriv,
        ))
    if t.y_deriv is not None:
        out.append(make_term(t.coeff, t.factors, t.s_exp, t.q0_exp, t.y_deriv + 1))
    return out


def formal_derivative(e: FormalExpr) -> FormalExpr:
    """Exact formal d/dx with the rewrite rules s^2 = 2 q0, s' = q0'/s."""
    terms = []
    for t in e.terms:
        terms.extend(_term_derivative(t))
    return formal_expr(terms)


# ---------------------------------------------------------------------------
# atoms of the divergent form

Symbol = tuple[str, int]  # ('p', k) or ('q', k)


@dataclass(frozen=True)
class Atom:
    """One summand c * (w^(w_deriv) y^(inner))^(outer)."""

    coeff: ExactComplex
    sym: Symbol
    w_deriv: int
    inner: int
    outer: int

    def __str__(self):
        name = f"{self.sym[0]}{self.sym[1]}" + _primes(self.w_deriv)
        body = f"({name}*y{_primes(self.inner)}){_primes(self.outer)}"
        c = str(self.coeff)
        return body if c == "1" else f"({c})*{body}"


AtomicDivergentExpr = tuple[Atom, ...]


def divergent_form(n: int) -> AtomicDivergentExpr:
    """The order-(2n+1) expression as nested-derivative atoms.

    The q-sum atoms carry the (k-1)-th derivative of the primitive q_k;
    that is the form the matrix recursion reproduces (writing q_k^(k)
    instead breaks the identity; see NOTES.md).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lead = i_power(1) * ((-1) ** n)
    atoms = [
        Atom(lead, ("q", 0), 0, n + 1, n),
        Atom(lead, ("q", 0), 0, n, n + 1),
    ]
    for k in range(n + 1):
        atoms.append(Atom(ExactComplex.of((-1) ** (n + k)), ("p", k), k, n - k, n - k))
    for k in range(1, n + 1):
        c = i_power(1) * ((-1) ** (n + k + 1))
        atoms.append(Atom(c, ("q", k), k - 1, n + 1 - k, n - k))
        atoms.append(Atom(c, ("q", k), k - 1, n - k, n + 1 - k))
    return tuple(atoms)


def expand(ade: AtomicDivergentExpr) -> FormalExpr:
    """Leibniz expansion of every atom, canonicalized."""
    terms = []
    for atom in ade:
        sym, idx = atom.sym
        for m in range(atom.outer + 1):
            terms.append(make_term(
                atom.coeff * comb(atom.outer, m),
                (((sym, idx, atom.w_deriv + m), 1),),
                0,
                0,
                atom.inner + atom.outer - m,
            ))
    return formal_expr(terms)


def formal_adjoint(ade: AtomicDivergentExpr) -> AtomicDivergentExpr:
    """Lagrange adjoint on the atom list, for real-declared coefficients:
    c (w y^(a))^(b) maps to conj(c) (-1)^(a+b) (w y^(b))^(a)."""
    return tuple(
        Atom(
            atom.coeff.conjugate() * ((-1) ** (atom.inner + atom.outer)),
            atom.sym,
            atom.w_deriv,
            atom.outer,
            atom.inner,
        )
        for atom in ade
    )


# ---------------------------------------------------------------------------
# symbolic entries and the quasi-derivative recursion

def entry_expr(kind: sz.EntryKind) -> FormalExpr:
    """The matrix entry as a scalar formal expression (phi combinations
    expanded into p and q immediately)."""
    tag = kind.tag
    if tag == sz.ZERO:
        return EXPR_ZERO
    if tag == sz.ONE:
        return formal_expr([make_term(EC_ONE)])
    if tag == sz.INV_SQRT_2Q0:
        return formal_expr([make_term(EC_ONE, s_exp=-1)])
    if tag == sz.CENTER_DIAG:
        return formal_expr([make_term(ExactComplex.of(0, Fraction(1, 2)),
                                      ((("p", 0, 0), 1),), 0, -1)])
    if tag == sz.PHI_TILDE_ROW:
        j = kind.j
        sign = (-1) ** j
        return formal_expr([
            make_term(EC_I * sign, ((("p", j, 0), 1),), s_exp=-1),
            make_term(ExactComplex.of(sign), ((("q", j, 0), 1),), s_exp=-1),
        ])
    if tag == sz.PHI_COL:
        j = kind.j
        return formal_expr([
            make_term(EC_I, ((("p", j, 0), 1),), s_exp=-1),
            make_term(-EC_ONE, ((("q", j, 0), 1),), s_exp=-1),
        ])
    if tag == sz.LOWER_BLOCK:
        c, w = sz.lower_block_weights(kind.k, kind.j)
        return formal_expr([
            make_term(ExactComplex.of(0, c), ((("p", kind.j + 1, 0), 1),)),
            make_term(ExactComplex.of(Fraction(c) * w), ((("q", kind.j + 1, 0), 1),)),
        ])
    raise ValueError(f"unknown entry kind {tag!r}")


_S = formal_expr([make_term(EC_ONE, s_exp=1)])


@lru_cache(maxsize=None)
def quasi_chain(n: int) -> tuple[FormalExpr, ...]:
    """Formal quasi-derivatives y^[0] .. y^[2n] from the matrix recursion.

    Each step inverts the superdiagonal entry of the current row:
    y^[i] = f_{i,i+1}^(-1) [ (y^[i-1])' - sum_{j != i+1} f_{i,j} y^[j-1] ].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pattern = sz.sparsity_pattern(n)
    chain = [formal_expr([make_term(EC_ONE, y_deriv=0)])]  # y^[0] = y
    for i in range(1, 2 * n + 1):
        rhs = formal_derivative(chain[i - 1])
        for (row, col), kind in pattern.items():
            if row != i or col == i + 1:
                continue
            rhs = fe_sub(rhs, fe_mul(entry_expr(kind), chain[col - 1]))
        diag = pattern[(i, i + 1)]
        if diag.tag == sz.INV_SQRT_2Q0:
            rhs = fe_mul(_S, rhs)
        elif diag.tag != sz.ONE:
            raise AssertionError(f"unexpected superdiagonal kind {diag.tag}")
        chain.append(rhs)
    return tuple(chain)


def quasi_tau(n: int) -> FormalExpr:
    """The regularized expression i^(2n+1)[(y^[2n])' - f_{2n+1,n+1} y^[n]],
    fully expanded; asserts that the square-root symbol cancelled and that
    no negative q0 power survived."""
    chain = quasi_chain(n)
    pattern = sz.sparsity_pattern(n)
    closure = fe_sub(
        formal_derivative(chain[2 * n]),
        fe_mul(entry_expr(pattern[(2 * n + 1, n + 1)]), chain[n]),
    )
    tau = fe_scale(closure, i_power(2 * n + 1))
    for t in tau.terms:
        if t.s_exp:
            raise RuntimeError(f"residual sqrt(2q0) power in term {t}")
        if t.q0_exp < 0:
            raise RuntimeError(f"negative q0 power in term {t}")
    return tau


# ---------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class EqualityReport:
    equal: bool
    diff: tuple[FormalTerm, ...]  # terms of a - b, empty when equal

    def __bool__(self):
        return self.equal

    def diff_strings(self) -> list[str]:
        return [str(t) for t in self.diff]


def expr_equal(a: FormalExpr, b: FormalExpr) -> EqualityReport:
    """Exact equality of canonical forms; the diff lists the terms of a - b."""
    delta = fe_sub(a, b)
    return EqualityReport(equal=not delta.terms, diff=delta.terms)


def verify_identity(n: int) -> EqualityReport:
    """Compare the recursion output against the expanded divergent form."""
    return expr_equal(quasi_tau(n), expand(divergent_form(n)))
