"""First-order system integration and boundary-eigenvalue location.

The regularized system u' = (F(x) + lam*E) u propagates the
quasi-derivative vector u = (y^[0], ..., y^[2n]); E has the single entry
(-i)^(2n+1) at (row 2n+1, col 1), which is the closure relation
i^(2n+1)[(y^[2n])' - i (p_n + i q_n) y^(n)] = lam * y rearranged for
(y^[2n])'. Integration is split at every global coefficient breakpoint
and the matrix is evaluated one-sided on each subinterval, so step
coefficients are handled exactly while the state stays continuous: that
continuity is the point of the quasi-derivative coordinates.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSet, eval_coefficient
from .errors import IntegrationError
from .shinzettl import MatrixEvaluator, ShinZettlMatrix, shin_zettl_matrix

log = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_REFINE_TOL = 1e-10
DEFAULT_MAX_ITER = 40

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass
class SpectralSystem:
    """The system matrix together with the spectral-parameter coupling."""

    matrix: ShinZettlMatrix
    lam: complex = 0j

    @property
    def size(self) -> int:
        return self.matrix.size

    def e_weight(self) -> complex:
        return _minus_i_power(2 * self.matrix.n + 1)


def _minus_i_power(m: int) -> complex:
    return ((1 + 0j), (-1j), (-1 + 0j), (1j))[m % 4]


def spectral_system(cs: CoefficientSet, lam: complex = 0j) -> SpectralSystem:
    return SpectralSystem(matrix=shin_zettl_matrix(cs), lam=complex(lam))


class _SystemRHS:
    """Evaluates (F(x) + lam E) @ U with one-sided coefficient lookup."""

    def __init__(self, sys: SpectralSystem):
        self.eval_f = MatrixEvaluator(sys.matrix)
        self.size = sys.size
        self.lam_entry = complex(sys.lam) * sys.e_weight()

    def __call__(self, x, u, side):
        m = self.eval_f(x, side)
        if self.lam_entry:
            m[-1, 0] += self.lam_entry
        if not np.all(np.isfinite(m.view(float))):
            raise IntegrationError(f"non-finite system entry at x={x}")
        return m @ u


@dataclass
class StepDiagnostics:
    max_error_estimate: float = 0.0
    steps: int = 0
    rejected: int = 0


def _error_norm(err, u0, u1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(u0), np.abs(u1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _step_segment(f, x0, u, x1, rtol, atol, diag, fixed_step=None):
    """Integrate one breakpoint-free segment [x0, x1] (either direction)."""
    if x0 == x1:
        return u
    lo, hi = (x0, x1) if x0 < x1 else (x1, x0)

    def side_of(x):
        if x <= lo:
            return "+"
        if x >= hi:
            return "-"
        return "+"

    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    h = fixed_step if fixed_step is not None else span / 100
    h = min(h, span)
    x = x0
    k1 = f(x, u, side_of(x))
    facold = 1e-4
    safety, beta = 0.9, 0.04
    expo = 0.2 - beta * 0.75
    while True:
        remaining = abs(x1 - x)
        if remaining <= 0:
            break
        h = min(h, remaining)
        if h < 16 * np.finfo(float).eps * max(abs(x), 1.0) and fixed_step is None:
            raise IntegrationError(f"step size underflow at x={x}")
        hd = direction * h
        ks = [k1]
        for s_idx in range(1, 7):
            xs = x + _DP_C[s_idx] * hd
            incr = sum(a * k for a, k in zip(_DP_A[s_idx], ks))
            ks.append(f(xs, u + hd * incr, side_of(xs)))
        u_new = u + hd * sum(b * k for b, k in zip(_DP_B, ks))
        err_vec = hd * sum(e * k for e, k in zip(_DP_E, ks))
        err = _error_norm(err_vec, u, u_new, rtol, atol)
        if fixed_step is not None or err <= 1.0:
            diag.steps += 1
            diag.max_error_estimate = max(diag.max_error_estimate, err)
            x = x1 if abs(x1 - (x + hd)) < 1e-15 * max(1.0, abs(x1)) else x + hd
            u = u_new
            k1 = ks[6]  # FSAL
            if fixed_step is None:
                fac11 = max(err, 1e-16) ** expo
                fac = fac11 / facold**beta
                fac = max(0.2, min(5.0, safety / fac))
                h = h * fac
                facold = max(err, 1e-4)
        else:
            diag.rejected += 1
            fac11 = err**expo
            h = h * max(0.2, safety / fac11)
            k1 = ks[0]
    return u


def _integrate(sys: SpectralSystem, x0, u0, x1, rtol, atol, fixed_step=None):
    """Breakpoint-aware integration; returns (endpoint state, diagnostics)."""
    cs = sys.matrix.cs
    a, b = cs.interval
    lo, hi = min(x0, x1), max(x0, x1)
    if lo < a - 1e-12 * max(1, abs(a)) or hi > b + 1e-12 * max(1, abs(b)):
        raise IntegrationError(f"integration range [{lo}, {hi}] leaves [{a}, {b}]")
    cuts = [c for c in cs.breakpoints if lo < c < hi]
    if x1 < x0:
        cuts = cuts[::-1]
    f = _SystemRHS(sys)
    diag = StepDiagnostics()
    u = np.asarray(u0, dtype=complex)
    if u.shape[0] != sys.size:
        raise ValueError(f"state dimension {u.shape[0]} != system size {sys.size}")
    x = x0
    for c in cuts:
        u = _step_segment(f, x, u, c, rtol, atol, diag, fixed_step)
        x = c
    u = _step_segment(f, x, u, x1, rtol, atol, diag, fixed_step)
    return u, diag


def integrate_system(sys: SpectralSystem, x0, u0, x1,
                     rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, fixed_step=None) -> np.ndarray:
    """Propagate a quasi-derivative state from x0 to x1.

    fixed_step disables adaptivity (used by the observed-order tests).
    """
    u, _ = _integrate(sys, x0, u0, x1, rtol, atol, fixed_step)
    return u


@dataclass
class FundamentalMatrix:
    """Columns are the solutions launched from the identity at the basepoint."""

    y: np.ndarray
    basepoint: float
    endpoint: float
    lam: complex
    tolerance_achieved: float

    def det(self) -> complex:
        return complex(np.linalg.det(self.y))


def fundamental_matrix(cs: CoefficientSet, lam: complex, a: float, b: float,
                       rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> FundamentalMatrix:
    sys = spectral_system(cs, lam)
    ident = np.eye(sys.size, dtype=complex)
    y, diag = _integrate(sys, a, ident, b, rtol, atol)
    return FundamentalMatrix(
        y=y, basepoint=a, endpoint=b, lam=complex(lam),
        tolerance_achieved=diag.max_error_estimate,
    )


def liouville_expected(cs: CoefficientSet, a: float, b: float) -> complex:
    """exp of the integral of the only diagonal entry, i p0 / (2 q0).

    Composite Gauss-Legendre split at the breakpoints; the spectral
    parameter never enters (its coupling is off-diagonal), so the
    determinant of the fundamental matrix must match this for every lam.
    """
    nodes, weights = np.polynomial.legendre.leggauss(32)
    cuts = [a] + [c for c in cs.breakpoints if a < c < b] + [b]
    total = 0j
    for lo, hi in zip(cuts, cuts[1:]):
        panels = max(1, math.ceil((hi - lo) / 0.5))
        for p in range(panels):
            pl = lo + (hi - lo) * p / panels
            ph = lo + (hi - lo) * (p + 1) / panels
            mid, half = (pl + ph) / 2, (ph - pl) / 2
            for t, w in zip(nodes, weights):
                x = mid + half * t
                p0 = eval_coefficient(cs.p[0], x)
                q0 = eval_coefficient(cs.q0, x)
                total += w * half * (1j * p0 / (2 * q0))
    return np.exp(total)


def liouville_check(cs: CoefficientSet, lam: complex, rtol=DEFAULT_RTOL,
                    atol=DEFAULT_ATOL) -> dict:
    a, b = cs.interval
    fm = fundamental_matrix(cs, lam, a, b, rtol, atol)
    expected = liouville_expected(cs, a, b)
    det = fm.det()
    return {
        "det": det,
        "expected": expected,
        "relative_error": abs(det / expected - 1.0),
    }


# ---------------------------------------------------------------------------
# boundary problems

@dataclass
class BoundaryProblem:
    """A u(a) + B u(b) = 0 on quasi-derivative vectors.

    The conditions act on the regularized coordinates, the only ones in
    which endpoint data is well defined for singular coefficients.
    """

    cs: CoefficientSet
    a_matrix: np.ndarray
    b_matrix: np.ndarray
    interval: tuple[float, float] | None = None
    preset: str | None = None

    def __post_init__(self):
        if self.interval is None:
            self.interval = self.cs.interval
        size = 2 * self.cs.n + 1
        self.a_matrix = np.asarray(self.a_matrix, dtype=complex)
        self.b_matrix = np.asarray(self.b_matrix, dtype=complex)
        if self.a_matrix.shape != (size, size) or self.b_matrix.shape != (size, size):
            raise ValueError(f"boundary matrices must be {size}x{size}")
        stacked = np.hstack([self.a_matrix, self.b_matrix])
        if np.linalg.matrix_rank(stacked) < size:
            log.warning("boundary conditions are degenerate: rank [A | B] < %d", size)


PRESETS = ("periodic", "antiperiodic")


def boundary_problem(cs: CoefficientSet, preset_or_matrices, interval=None) -> BoundaryProblem:
    size = 2 * cs.n + 1
    if isinstance(preset_or_matrices, str):
        name = preset_or_matrices
        ident = np.eye(size, dtype=complex)
        if name == "periodic":
            return BoundaryProblem(cs, ident, -ident, interval, preset=name)
        if name == "antiperiodic":
            return BoundaryProblem(cs, ident, ident, interval, preset=name)
        raise ValueError(f"unknown boundary preset {name!r} (have {PRESETS})")
    a_matrix, b_matrix = preset_or_matrices
    return BoundaryProblem(cs, a_matrix, b_matrix, interval)


def characteristic_det(bp: BoundaryProblem, lam: complex,
                       rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> complex:
    """det(A + B Y(b; lam)); zero exactly at the eigenvalues."""
    a, b = bp.interval
    fm = fundamental_matrix(bp.cs, lam, a, b, rtol, atol)
    return complex(np.linalg.det(bp.a_matrix + bp.b_matrix @ fm.y))


# ---------------------------------------------------------------------------
# eigenvalue search

@dataclass(frozen=True)
class RealIntervalSearch:
    lo: float
    hi: float
    samples: int


@dataclass(frozen=True)
class ComplexRectSearch:
    corners: tuple[complex, complex]
    grid: tuple[int, int]


@dataclass(frozen=True)
class Eigenvalue:
    lam: complex
    residual: float


@dataclass
class EigenvalueResult:
    eigenvalues: list[Eigenvalue]
    warnings: list[str] = field(default_factory=list)


def _secant(detf, z0, z1, tol, max_iter):
    d0, d1 = detf(z0), detf(z1)
    if d1 == 0:
        return z1, 0.0, True
    for _ in range(max_iter):
        denom = d1 - d0
        if denom == 0:
            return z1, abs(d1), False
        z2 = z1 - d1 * (z1 - z0) / denom
        if not (math.isfinite(z2.real) and math.isfinite(z2.imag)):
            return z1, abs(d1), False
        z0, d0 = z1, d1
        z1, d1 = z2, detf(z2)
        if abs(z1 - z0) <= tol * max(1.0, abs(z1)):
            return z1, abs(d1), True
        if d1 == 0:
            return z1, 0.0, True
    return z1, abs(d1), False


def find_eigenvalues(bp: BoundaryProblem, search,
                     refine_tol=DEFAULT_REFINE_TOL, max_iter=DEFAULT_MAX_ITER,
                     rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, jobs=1) -> EigenvalueResult:
    """Scan |det| over the search set, refine candidates by complex secant.

    The scan runs at a relaxed tolerance (capped at 1e-6/1e-9); secant
    refinement and the reported residuals use the full tolerances. Roots
    closer than 10*refine_tol are merged; results are sorted by |lam|.
    """
    scan_rtol, scan_atol = max(rtol, 1e-6), max(atol, 1e-9)

    def det_scan(lam):
        return characteristic_det(bp, lam, scan_rtol, scan_atol)

    def det_full(lam):
        return characteristic_det(bp, lam, rtol, atol)

    if isinstance(search, RealIntervalSearch):
        if search.samples < 2:
            raise ValueError("real interval search needs samples >= 2")
        lams = [complex(v) for v in np.linspace(search.lo, search.hi, search.samples)]
        in_window = _window_filter_real(search)
    elif isinstance(search, ComplexRectSearch):
        lams, shape = _rect_points(search)
        in_window = _window_filter_rect(search)
    else:
        raise TypeError(f"unknown search specification {search!r}")

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            dets = list(pool.map(det_scan, lams))
    else:
        dets = [det_scan(lam) for lam in lams]

    if isinstance(search, RealIntervalSearch):
        seeds = _real_seeds(lams, dets)
    else:
        seeds = _rect_seeds(lams, dets, shape)

    warnings_list = []
    found = []
    for z0, z1 in seeds:
        lam, residual, ok = _secant(det_full, z0, z1, refine_tol, max_iter)
        if not ok:
            warnings_list.append(
                f"secant did not converge from seed {z0!s} (last lam {lam!s}, residual {residual:.3e})"
            )
            log.warning("dropping non-converged candidate near lam=%s", z0)
            continue
        if not in_window(lam):
            continue
        found.append(Eigenvalue(lam=lam, residual=residual))

    merged: list[Eigenvalue] = []
    for cand in sorted(found, key=lambda e: (abs(e.lam), e.lam.real, e.lam.imag)):
        dup = next(
            (m for m in merged if abs(m.lam - cand.lam) < 10 * refine_tol * max(1.0, abs(m.lam))),
            None,
        )
        if dup is None:
            merged.append(cand)
        elif cand.residual < dup.residual:
            merged[merged.index(dup)] = cand
    merged.sort(key=lambda e: (abs(e.lam), e.lam.real, e.lam.imag))
    return EigenvalueResult(eigenvalues=merged, warnings=warnings_list)


def _window_filter_real(search: RealIntervalSearch):
    pad = 0.05 * (search.hi - search.lo)

    def keep(lam):
        return (search.lo - pad <= lam.real <= search.hi + pad
                and abs(lam.imag) <= max(pad, 1e-6))

    return keep


def _window_filter_rect(search: ComplexRectSearch):
    c0, c1 = search.corners
    re_lo, re_hi = sorted((c0.real, c1.real))
    im_lo, im_hi = sorted((c0.imag, c1.imag))
    pad_re = 0.05 * (re_hi - re_lo) if re_hi > re_lo else 1e-6
    pad_im = 0.05 * (im_hi - im_lo) if im_hi > im_lo else 1e-6

    def keep(lam):
        return (re_lo - pad_re <= lam.real <= re_hi + pad_re
                and im_lo - pad_im <= lam.imag <= im_hi + pad_im)

    return keep


def _rect_points(search: ComplexRectSearch):
    c0, c1 = search.corners
    nre, nim = search.grid
    if nre < 2 or nim < 2:
        raise ValueError("complex rectangle grid needs at least 2 points per axis")
    res = np.linspace(min(c0.real, c1.real), max(c0.real, c1.real), nre)
    ims = np.linspace(min(c0.imag, c1.imag), max(c0.imag, c1.imag), nim)
    pts = [complex(r, m) for m in ims for r in res]
    return pts, (nim, nre)


def _real_seeds(lams, dets):
    mags = [abs(d) for d in dets]
    seeds = []
    for i in range(1, len(lams) - 1):
        if mags[i] < mags[i - 1] and mags[i] <= mags[i + 1]:
            seeds.append((lams[i], lams[i] + (lams[i + 1] - lams[i]) / 4))
    for i in range(len(lams) - 1):
        re0, re1 = dets[i].real, dets[i + 1].real
        near_real = (abs(dets[i].imag) <= 0.25 * abs(dets[i])
                     and abs(dets[i + 1].imag) <= 0.25 * abs(dets[i + 1]))
        if re0 * re1 < 0 and near_real:
            seeds.append((lams[i], lams[i + 1]))
    return seeds


def _rect_seeds(lams, dets, shape):
    nim, nre = shape
    mags = np.array([abs(d) for d in dets]).reshape(nim, nre)
    seeds = []
    spacing_re = abs(lams[1] - lams[0]) if nre > 1 else 1e-3
    for r in range(1, nim - 1):
        for c in range(1, nre - 1):
            window = mags[r - 1:r + 2, c - 1:c + 2]
            if mags[r, c] == window.min() and mags[r, c] < window.max():
                z = lams[r * nre + c]
                seeds.append((z, z + spacing_re / 4))
    return seeds
