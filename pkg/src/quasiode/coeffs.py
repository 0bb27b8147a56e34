"""Coefficient primitives and their validated aggregation.

The differential expression of order 2n+1 is specified through the
primitives q0, p0..pn, q1..qn. Each primitive is one of three concrete
kinds: a closed-form expression, a piecewise-constant step function, or
linearly interpolated grid samples. Steps and grids carry no classical
derivatives; their distributional derivatives only ever enter through
the regularized first-order system, never directly.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from . import expr as ex
from .errors import CoefficientError, SchemaError, SmoothnessError

VALIDATION_GRID = 1024


@dataclass(frozen=True)
class Coefficient:
    """One scalar coefficient function on the problem interval.

    kind 'expr' wraps an AST (infinitely differentiable by closure);
    kind 'steps' is constant between its breakpoints; kind 'grid' is the
    linear interpolant of complex samples. smoothness_order counts the
    classical derivatives that may be requested.
    """

    kind: str  # 'expr' | 'steps' | 'grid'
    ast: ex.Node | None = None
    source: str | None = None
    breakpoints: tuple[float, ...] = ()
    values: tuple[complex, ...] = ()
    abscissae: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "expr":
            if self.ast is None:
                raise CoefficientError("expr coefficient requires an AST")
        elif self.kind == "steps":
            if len(self.values) != len(self.breakpoints) + 1:
                raise CoefficientError(
                    "steps coefficient needs len(values) == len(breakpoints) + 1"
                )
            if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
                raise CoefficientError("step breakpoints must be strictly increasing")
            if not all(_finite(v) for v in self.values):
                raise CoefficientError("step values must be finite")
        elif self.kind == "grid":
            if len(self.values) != len(self.abscissae) or len(self.values) < 2:
                raise CoefficientError("grid coefficient needs matching x/value arrays (>= 2 points)")
            if any(b >= c for b, c in zip(self.abscissae, self.abscissae[1:])):
                raise CoefficientError("grid abscissae must be strictly increasing")
            if not all(_finite(v) for v in self.values):
                raise CoefficientError("grid values must be finite")
        else:
            raise CoefficientError(f"unknown coefficient kind {self.kind!r}")

    @property
    def smoothness_order(self) -> float:
        return math.inf if self.kind == "expr" else 0

    def is_zero(self) -> bool:
        if self.kind == "expr":
            return isinstance(self.ast, ex.Const) and self.ast.value == 0
        return all(v == 0 for v in self.values)


def _finite(v) -> bool:
    v = complex(v)
    return math.isfinite(v.real) and math.isfinite(v.imag)


def expr_coefficient(src: str) -> Coefficient:
    return Coefficient(kind="expr", ast=ex.parse_expression(src), source=src)


def zero_coefficient() -> Coefficient:
    return Coefficient(kind="expr", ast=ex.ZERO, source="0")


def steps_coefficient(breakpoints, values) -> Coefficient:
    return Coefficient(
        kind="steps",
        breakpoints=tuple(float(b) for b in breakpoints),
        values=tuple(complex(v) for v in values),
    )


def grid_coefficient(abscissae, values) -> Coefficient:
    return Coefficient(
        kind="grid",
        abscissae=tuple(float(a) for a in abscissae),
        values=tuple(complex(v) for v in values),
    )


def eval_coefficient(c: Coefficient, x: float, deriv: int = 0, side: str | None = None) -> complex:
    """Evaluate a coefficient (or one of its classical derivatives) at x.

    side ('+' or '-') resolves the value exactly at a step breakpoint;
    without it such an evaluation is ambiguous and raises.
    """
    if deriv < 0:
        raise ValueError("derivative order must be >= 0")
    if deriv > c.smoothness_order:
        raise SmoothnessError(
            f"derivative of order {deriv} requested from a {c.kind} coefficient"
        )
    if c.kind == "expr":
        node = ex.differentiate(c.ast, deriv) if deriv else c.ast
        return ex.evaluate(node, x)
    if c.kind == "steps":
        if x in c.breakpoints:
            if side == "+":
                return c.values[bisect_right(c.breakpoints, x)]
            if side == "-":
                return c.values[bisect_left(c.breakpoints, x)]
            raise CoefficientError(
                f"evaluation exactly at breakpoint x={x} requires a side flag"
            )
        return c.values[bisect_right(c.breakpoints, x)]
    # grid: piecewise-linear interpolation, clamped to the sample range
    xs, vs = c.abscissae, c.values
    if x <= xs[0]:
        return vs[0]
    if x >= xs[-1]:
        return vs[-1]
    k = bisect_right(xs, x)
    t = (x - xs[k - 1]) / (xs[k] - xs[k - 1])
    return vs[k - 1] + t * (vs[k] - vs[k - 1])


@dataclass(frozen=True)
class CoefficientSet:
    """The full tuple (n, q0, p0..pn, q1..qn) with validated hypotheses.

    q0 must be continuous (expr or grid kind) with strictly positive real
    part; that is checked by dense sampling, not proved. Breakpoints of
    all step coefficients are merged into one sorted global list.
    """

    n: int
    interval: tuple[float, float]
    q0: Coefficient
    p: tuple[Coefficient, ...]  # indices 0..n
    q: tuple[Coefficient, ...]  # indices 1..n, stored 0-based as q[k-1]
    breakpoints: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise CoefficientError("order parameter n must be >= 1")
        a, b = self.interval
        if not (a < b):
            raise CoefficientError(f"invalid interval [{a}, {b}]")
        if len(self.p) != self.n + 1 or len(self.q) != self.n:
            raise CoefficientError("coefficient arrays must have lengths n+1 (p) and n (q)")
        if self.q0.kind == "steps":
            raise CoefficientError("q0 must be continuous: kind 'steps' is rejected")
        points = set()
        for c in (self.q0, *self.p, *self.q):
            for bp in c.breakpoints:
                if not (a < bp < b):
                    raise CoefficientError(f"breakpoint x={bp} outside the open interval ({a}, {b})")
                points.add(bp)
            if c.kind == "grid" and (c.abscissae[0] > a or c.abscissae[-1] < b):
                raise CoefficientError(
                    f"grid abscissae [{c.abscissae[0]}, {c.abscissae[-1]}] do not cover [{a}, {b}]"
                )
        object.__setattr__(self, "breakpoints", tuple(sorted(points)))
        self._validate_q0()

    def _validate_q0(self):
        a, b = self.interval
        samples = [a + (b - a) * k / (VALIDATION_GRID - 1) for k in range(VALIDATION_GRID)]
        samples.extend(self.breakpoints)
        for x in samples:
            v = eval_coefficient(self.q0, x)
            if not v.real > 0:
                raise CoefficientError(f"Re q0 <= 0 at x={x} (q0={v})")

    def p_coeff(self, k: int) -> Coefficient:
        if not 0 <= k <= self.n:
            raise IndexError(f"p index {k} outside 0..{self.n}")
        return self.p[k]

    def q_coeff(self, k: int) -> Coefficient:
        if k == 0:
            return self.q0
        if not 1 <= k <= self.n:
            raise IndexError(f"q index {k} outside 0..{self.n}")
        return self.q[k - 1]

    def coefficient(self, sym: str, index: int) -> Coefficient:
        return self.p_coeff(index) if sym == "p" else self.q_coeff(index)


def phi(cs: CoefficientSet, k: int, x: float, conjugate_variant: bool = False,
        side: str | None = None) -> complex:
    """The combination p_k + i*q_k (or p_k - i*q_k for the tilde variant).

    The tilde variant is the literal sign flip on q_k, not the complex
    conjugate: for complex-valued p_k, q_k the two differ.
    """
    if not 1 <= k <= cs.n:
        raise IndexError(f"phi index {k} outside 1..{cs.n}")
    pk = eval_coefficient(cs.p_coeff(k), x, side=side)
    qk = eval_coefficient(cs.q_coeff(k), x, side=side)
    return pk - 1j * qk if conjugate_variant else pk + 1j * qk


# ---------------------------------------------------------------------------
# document loading / serialization

def _coefficient_from_doc(name: str, spec) -> Coefficient:
    if isinstance(spec, str):
        return expr_coefficient(spec)
    if not isinstance(spec, dict):
        raise SchemaError(f"coefficient {name}: expected string or object, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind == "expr":
        _check_keys(f"coefficient {name}", spec, {"kind", "expr"})
        if not isinstance(spec.get("expr"), str):
            raise SchemaError(f"coefficient {name}: 'expr' must be a string")
        return expr_coefficient(spec["expr"])
    if kind == "steps":
        _check_keys(f"coefficient {name}", spec, {"kind", "breakpoints", "values"})
        return steps_coefficient(spec["breakpoints"], [parse_complex(v) for v in spec["values"]])
    if kind == "grid":
        _check_keys(f"coefficient {name}", spec, {"kind", "x", "values"})
        return grid_coefficient(spec["x"], [parse_complex(v) for v in spec["values"]])
    raise SchemaError(f"coefficient {name}: unknown kind {kind!r}")


def _check_keys(where: str, obj: dict, allowed: set):
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{where}: unknown keys {sorted(unknown)}")


def parse_complex(v) -> complex:
    """Accept a plain number, an {'re':..,'im':..} object, or a string like '1+2i'."""
    if isinstance(v, bool):
        raise SchemaError(f"not a complex number: {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict):
        _check_keys("complex value", v, {"re", "im"})
        re_part = v.get("re", 0.0)
        im_part = v.get("im", 0.0)
        if not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in (re_part, im_part)):
            raise SchemaError(f"complex object fields must be numbers: {v!r}")
        return complex(re_part, im_part)
    if isinstance(v, str):
        text = v.strip().replace(" ", "")
        if not text:
            raise SchemaError("empty complex literal")
        try:
            return complex(text.replace("i", "j"))
        except ValueError:
            raise SchemaError(f"malformed complex literal {v!r}")
    raise SchemaError(f"not a complex number: {v!r}")


def load_coefficient_set(document: dict) -> CoefficientSet:
    """Build a CoefficientSet from the coefficient section of a problem document.

    Missing p_k / q_k default to zero. Validation of Re q0 > 0 runs on a
    1024-point uniform grid plus every declared breakpoint.
    """
    if "n" not in document:
        raise SchemaError("document missing 'n'")
    n = document["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError(f"'n' must be an integer >= 1, got {n!r}")
    interval = document.get("interval")
    if (not isinstance(interval, (list, tuple)) or len(interval) != 2
            or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in interval)):
        raise SchemaError("'interval' must be a pair [a, b] of numbers")
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise SchemaError(f"'interval' must satisfy a < b, got [{a}, {b}]")

    coeffs = document.get("coefficients", {})
    if not isinstance(coeffs, dict):
        raise SchemaError("'coefficients' must be an object")
    legal = {"q0"} | {f"p{k}" for k in range(n + 1)} | {f"q{k}" for k in range(1, n + 1)}
    unknown = set(coeffs) - legal
    if unknown:
        raise SchemaError(f"coefficients: unknown or out-of-range names {sorted(unknown)}")
    if "q0" not in coeffs:
        raise SchemaError("coefficients: 'q0' is required")

    q0 = _coefficient_from_doc("q0", coeffs["q0"])
    p = tuple(
        _coefficient_from_doc(f"p{k}", coeffs[f"p{k}"]) if f"p{k}" in coeffs else zero_coefficient()
        for k in range(n + 1)
    )
    q = tuple(
        _coefficient_from_doc(f"q{k}", coeffs[f"q{k}"]) if f"q{k}" in coeffs else zero_coefficient()
        for k in range(1, n + 1)
    )
    return CoefficientSet(n=n, interval=(a, b), q0=q0, p=p, q=q)


def _coefficient_to_doc(c: Coefficient):
    if c.kind == "expr":
        return {"kind": "expr", "expr": c.source if c.source is not None else ex.to_source(c.ast)}
    if c.kind == "steps":
        return {
            "kind": "steps",
            "breakpoints": list(c.breakpoints),
            "values": [format_complex(v) for v in c.values],
        }
    return {
        "kind": "grid",
        "x": list(c.abscissae),
        "values": [format_complex(v) for v in c.values],
    }


def format_complex(v: complex) -> dict:
    return {"re": v.real, "im": v.imag}


def serialize_coefficient_set(cs: CoefficientSet) -> dict:
    doc = {"n": cs.n, "interval": list(cs.interval), "coefficients": {"q0": _coefficient_to_doc(cs.q0)}}
    for k in range(cs.n + 1):
        if not cs.p[k].is_zero():
            doc["coefficients"][f"p{k}"] = _coefficient_to_doc(cs.p[k])
    for k in range(1, cs.n + 1):
        if not cs.q[k - 1].is_zero():
            doc["coefficients"][f"q{k}"] = _coefficient_to_doc(cs.q[k - 1])
    return doc
