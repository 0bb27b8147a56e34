"""Structure and pointwise evaluation of the odd-order system matrix.

The matrix of size (2n+1) x (2n+1) has a fixed sparsity pattern built
from seven entry kinds. Indices in the public API are 1-based; only the
kinds carry parameters (which combination index, which lower-block
position). Entries involve the coefficient primitives themselves, never
their derivatives, which is what makes the first-order system usable
with step and sampled coefficients.

Layout for order parameter n (1-based rows/cols):

  (i, i+1)        = 1               for i = 1..n-1 and i = n+2..2n
  (n, n+1)        = 1/sqrt(2 q0)
  (n+1, n+2)      = 1/sqrt(2 q0)
  (n+1, n+1)      = i p0 / (2 q0)
  (n+1, n+1-j)    = (-1)^j i (p_j - i q_j) / sqrt(2 q0)   j = 1..n
  (n+1+j, n+1)    = i (p_j + i q_j) / sqrt(2 q0)          j = 1..n
  (n+1+k, n+k-j)  = (-1)^(j+k+1) C(j+1, k) [i p_{j+1} + (1 - 2k/(j+1)) q_{j+1}]
                                            k = 1..n-1, j = k..n-1

where C(m, k) is the binomial coefficient "m choose k".
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .coeffs import CoefficientSet, eval_coefficient

ONE = "One"
INV_SQRT_2Q0 = "InvSqrt2Q0"
CENTER_DIAG = "CenterDiag"
PHI_TILDE_ROW = "PhiTildeRow"
PHI_COL = "PhiCol"
LOWER_BLOCK = "LowerBlock"
ZERO = "Zero"


@dataclass(frozen=True)
class EntryKind:
    """Tagged entry descriptor; j/k are only set for the parametric kinds."""

    tag: str
    j: int | None = None
    k: int | None = None

    def __str__(self):
        if self.tag == PHI_TILDE_ROW or self.tag == PHI_COL:
            return f"{self.tag}({self.j})"
        if self.tag == LOWER_BLOCK:
            return f"{self.tag}({self.k},{self.j})"
        return self.tag


ZERO_ENTRY = EntryKind(ZERO)


def sparsity_pattern(n: int) -> dict[tuple[int, int], EntryKind]:
    """Map (row, col) -> EntryKind over the nonzero positions, 1-based.

    Positions not present in the map are Zero.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pattern: dict[tuple[int, int], EntryKind] = {}

    def put(row, col, kind):
        if (row, col) in pattern:
            raise AssertionError(f"entry collision at ({row}, {col})")
        pattern[(row, col)] = kind

    for i in range(1, n):
        put(i, i + 1, EntryKind(ONE))
    for i in range(n + 2, 2 * n + 1):
        put(i, i + 1, EntryKind(ONE))
    put(n, n + 1, EntryKind(INV_SQRT_2Q0))
    put(n + 1, n + 2, EntryKind(INV_SQRT_2Q0))
    put(n + 1, n + 1, EntryKind(CENTER_DIAG))
    for j in range(1, n + 1):
        put(n + 1, n + 1 - j, EntryKind(PHI_TILDE_ROW, j=j))
        put(n + 1 + j, n + 1, EntryKind(PHI_COL, j=j))
    for k in range(1, n):
        for j in range(k, n):
            put(n + 1 + k, n + k - j, EntryKind(LOWER_BLOCK, j=j, k=k))
    return pattern


def entry_kind(n: int, row: int, col: int) -> EntryKind:
    """The kind at one position, Zero when the position is off-pattern."""
    return sparsity_pattern(n).get((row, col), ZERO_ENTRY)


def lower_block_weights(k: int, j: int) -> tuple[int, Fraction]:
    """Exact pieces of the lower-block entry: (sign * binomial, q-weight).

    The entry is sign*C(j+1,k) * [i p_{j+1} + (1 - 2k/(j+1)) q_{j+1}]; the
    returned q-weight is the exact rational 1 - 2k/(j+1) = (j+1-2k)/(j+1).
    """
    c = (-1) ** (j + k + 1) * comb(j + 1, k)
    return c, Fraction(j + 1 - 2 * k, j + 1)


def eval_entry(kind: EntryKind, cs: CoefficientSet, x: float, side: str | None = None) -> complex:
    """Numeric value of one entry kind at x.

    The square root is the principal branch; Re q0 > 0 keeps 2 q0 off the
    branch cut, so the value varies continuously along the interval.
    """
    tag = kind.tag
    if tag == ZERO:
        return 0j
    if tag == ONE:
        return 1 + 0j
    q0 = eval_coefficient(cs.q0, x, side=side)
    if tag == INV_SQRT_2Q0:
        return 1 / cmath.sqrt(2 * q0)
    if tag == CENTER_DIAG:
        p0 = eval_coefficient(cs.p[0], x, side=side)
        return 1j * p0 / (2 * q0)
    if tag == PHI_TILDE_ROW:
        j = kind.j
        pj = eval_coefficient(cs.p[j], x, side=side)
        qj = eval_coefficient(cs.q[j - 1], x, side=side)
        return (-1) ** j * 1j * (pj - 1j * qj) / cmath.sqrt(2 * q0)
    if tag == PHI_COL:
        j = kind.j
        pj = eval_coefficient(cs.p[j], x, side=side)
        qj = eval_coefficient(cs.q[j - 1], x, side=side)
        return 1j * (pj + 1j * qj) / cmath.sqrt(2 * q0)
    if tag == LOWER_BLOCK:
        k, j = kind.k, kind.j
        pj1 = eval_coefficient(cs.p[j + 1], x, side=side)
        qj1 = eval_coefficient(cs.q[j], x, side=side)
        c, w = lower_block_weights(k, j)
        return c * (1j * pj1 + float(w) * qj1)
    raise ValueError(f"unknown entry kind {tag!r}")


@dataclass(frozen=True)
class ShinZettlMatrix:
    """The system matrix bound to a coefficient set: static pattern plus
    pointwise evaluation."""

    cs: CoefficientSet

    @property
    def n(self) -> int:
        return self.cs.n

    @property
    def size(self) -> int:
        return 2 * self.cs.n + 1

    @property
    def pattern(self) -> dict[tuple[int, int], EntryKind]:
        return sparsity_pattern(self.cs.n)


def shin_zettl_matrix(cs: CoefficientSet) -> ShinZettlMatrix:
    return ShinZettlMatrix(cs=cs)


class MatrixEvaluator:
    """Assembles numeric matrix values; reuses coefficient values across entries.

    Functionally identical to calling eval_entry position by position,
    but each primitive is evaluated once per x.
    """

    def __init__(self, m: ShinZettlMatrix):
        self.cs = m.cs
        self.size = m.size
        n = m.cs.n
        self._items = []
        for (row, col), kind in sorted(m.pattern.items()):
            self._items.append((row - 1, col - 1, kind))
        self._n = n

    def __call__(self, x: float, side: str | None = None) -> np.ndarray:
        cs = self.cs
        n = self._n
        q0 = eval_coefficient(cs.q0, x, side=side)
        s = cmath.sqrt(2 * q0)
        p = [eval_coefficient(c, x, side=side) for c in cs.p]
        q = [eval_coefficient(c, x, side=side) for c in cs.q]
        out = np.zeros((self.size, self.size), dtype=complex)
        for row, col, kind in self._items:
            tag = kind.tag
            if tag == ONE:
                v = 1 + 0j
            elif tag == INV_SQRT_2Q0:
                v = 1 / s
            elif tag == CENTER_DIAG:
                v = 1j * p[0] / (2 * q0)
            elif tag == PHI_TILDE_ROW:
                j = kind.j
                v = (-1) ** j * 1j * (p[j] - 1j * q[j - 1]) / s
            elif tag == PHI_COL:
                j = kind.j
                v = 1j * (p[j] + 1j * q[j - 1]) / s
            else:
                k, j = kind.k, kind.j
                c, w = lower_block_weights(k, j)
                v = c * (1j * p[j + 1] + float(w) * q[j])
            out[row, col] = v
        return out


def eval_matrix(m: ShinZettlMatrix, x: float, side: str | None = None) -> np.ndarray:
    """Dense numeric value of the matrix at x; off-pattern entries are exact zeros."""
    return MatrixEvaluator(m)(x, side=side)
