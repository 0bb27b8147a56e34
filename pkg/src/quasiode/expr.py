"""Closed-form expression trees for coefficient functions.

A small AST over the variable ``x``: rational/decimal constants, the
imaginary unit ``i``, unary ``-``, ``sin``, ``cos``, ``exp``, ``sqrt``,
the four arithmetic operations and integer powers. The tree is closed
under symbolic differentiation and evaluates to complex numbers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import EvaluationError, ParseError

DEFAULT_DERIVATIVE_CAP = 12

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: complex


@dataclass(frozen=True)
class Var(Node):
    pass


@dataclass(frozen=True)
class Unary(Node):
    op: str  # 'neg' | 'sin' | 'cos' | 'exp' | 'sqrt'
    arg: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str  # '+' | '-' | '*' | '/'
    left: Node
    right: Node


@dataclass(frozen=True)
class Power(Node):
    base: Node
    exponent: int


ZERO = Const(0)
ONE = Const(1)
X = Var()


# ---------------------------------------------------------------------------
# smart constructors (fold the constants differentiation churns out)

def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def add(a: Node, b: Node) -> Node:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_const(a, 0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Binary("*", a, b)


def div(a: Node, b: Node) -> Node:
    if _is_const(b, 1):
        return a
    return Binary("/", a, b)


def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(base: Node, exponent: int) -> Node:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**exponent)
    return Power(base, exponent)


# ---------------------------------------------------------------------------
# parsing

class _Tokenizer:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.tokens = []
        self._scan()

    def _byte_offset(self, pos):
        return len(self.src[:pos].encode("utf-8"))

    def _scan(self):
        src, n = self.src, len(self.src)
        i = 0
        while i < n:
            c = src[i]
            if c.isspace():
                i += 1
                continue
            if c in "+-*/^()":
                self.tokens.append((c, c, i))
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
                j = i
                while j < n and (src[j].isdigit() or src[j] == "."):
                    j += 1
                if j < n and src[j] in "eE":
                    k = j + 1
                    if k < n and src[k] in "+-":
                        k += 1
                    if k < n and src[k].isdigit():
                        while k < n and src[k].isdigit():
                            k += 1
                        j = k
                text = src[i:j]
                try:
                    value = int(text)
                except ValueError:
                    try:
                        value = float(text)
                    except ValueError:
                        raise ParseError(f"malformed number {text!r}", self._byte_offset(i))
                self.tokens.append(("num", value, i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                self.tokens.append(("ident", src[i:j], i))
                i = j
                continue
            raise ParseError(f"unexpected character {c!r}", self._byte_offset(i))
        self.tokens.append(("end", None, n))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _Tokenizer(src).tokens
        self.k = 0

    def _peek(self):
        return self.tokens[self.k]

    def _next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def _fail(self, message, pos):
        raise ParseError(message, len(self.src[:pos].encode("utf-8")))

    def _expect(self, kind):
        tok = self._next()
        if tok[0] != kind:
            self._fail(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Node:
        node = self._expr()
        tok = self._peek()
        if tok[0] != "end":
            self._fail(f"trailing input starting at {tok[1]!r}", tok[2])
        return node

    def _expr(self):
        node = self._term()
        while self._peek()[0] in ("+", "-"):
            op = self._next()[0]
            rhs = self._term()
            node = Binary(op, node, rhs)
        return node

    def _term(self):
        node = self._factor()
        while self._peek()[0] in ("*", "/"):
            op = self._next()[0]
            rhs = self._factor()
            node = Binary(op, node, rhs)
        return node

    def _factor(self):
        if self._peek()[0] == "-":
            self._next()
            return neg(self._factor())
        return self._power()

    def _power(self):
        base = self._atom()
        if self._peek()[0] == "^":
            self._next()
            return power(base, self._exponent())
        return base

    def _exponent(self) -> int:
        parenthesised = self._peek()[0] == "("
        if parenthesised:
            self._next()
        sign = 1
        if self._peek()[0] == "-":
            self._next()
            sign = -1
        tok = self._next()
        if tok[0] != "num" or not isinstance(tok[1], int):
            self._fail("exponent must be an integer literal", tok[2])
        if parenthesised:
            self._expect(")")
        return sign * tok[1]

    def _atom(self):
        tok = self._next()
        kind, value, pos = tok
        if kind == "num":
            return Const(value)
        if kind == "(":
            node = self._expr()
            self._expect(")")
            return node
        if kind == "ident":
            if value == "x":
                return X
            if value == "i":
                return Const(1j)
            if value in FUNCTIONS:
                self._expect("(")
                arg = self._expr()
                self._expect(")")
                return Unary(value, arg)
            self._fail(f"unknown identifier {value!r}", pos)
        self._fail(f"unexpected token {value!r}", pos)


def parse_expression(src: str) -> Node:
    """Parse a closed-form expression in ``x`` into an AST."""
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# differentiation and evaluation

def _derivative(node: Node) -> Node:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Unary):
        d = _derivative(node.arg)
        if node.op == "neg":
            return neg(d)
        if node.op == "sin":
            return mul(Unary("cos", node.arg), d)
        if node.op == "cos":
            return neg(mul(Unary("sin", node.arg), d))
        if node.op == "exp":
            return mul(node, d)
        if node.op == "sqrt":
            return div(d, mul(Const(2), node))
        raise ValueError(f"unknown unary op {node.op!r}")
    if isinstance(node, Binary):
        da, db = _derivative(node.left), _derivative(node.right)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, node.right), mul(node.left, db))
        if node.op == "/":
            num = sub(mul(da, node.right), mul(node.left, db))
            return div(num, power(node.right, 2))
        raise ValueError(f"unknown binary op {node.op!r}")
    if isinstance(node, Power):
        inner = mul(Const(node.exponent), power(node.base, node.exponent - 1))
        return mul(inner, _derivative(node.base))
    raise TypeError(f"not an AST node: {node!r}")


def differentiate(ast: Node, order: int = 1, cap: int | None = None) -> Node:
    """Exact symbolic derivative of the given order (order 0 returns the input)."""
    if order < 0:
        raise ValueError("derivative order must be >= 0")
    limit = DEFAULT_DERIVATIVE_CAP if cap is None else cap
    if order > limit:
        raise ValueError(f"derivative order {order} exceeds cap {limit}")
    node = ast
    for _ in range(order):
        node = _derivative(node)
    return node


def evaluate(node: Node, x: float) -> complex:
    """Evaluate at a real point; raises instead of returning non-finite values."""
    if isinstance(node, Const):
        return complex(node.value)
    if isinstance(node, Var):
        return complex(x)
    if isinstance(node, Unary):
        v = evaluate(node.arg, x)
        if node.op == "neg":
            return -v
        try:
            if node.op == "sin":
                r = cmath.sin(v)
            elif node.op == "cos":
                r = cmath.cos(v)
            elif node.op == "exp":
                r = cmath.exp(v)
            elif node.op == "sqrt":
                r = cmath.sqrt(v)
            else:
                raise ValueError(f"unknown unary op {node.op!r}")
        except OverflowError:
            raise EvaluationError(f"{node.op} overflow at x={x}")
        _check_finite(r, x)
        return r
    if isinstance(node, Binary):
        a = evaluate(node.left, x)
        b = evaluate(node.right, x)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            r = a * b
        else:
            if b == 0:
                raise EvaluationError(f"division by zero at x={x}")
            r = a / b
        _check_finite(r, x)
        return r
    if isinstance(node, Power):
        base = evaluate(node.base, x)
        if node.exponent < 0 and base == 0:
            raise EvaluationError(f"zero raised to negative power at x={x}")
        r = base**node.exponent
        _check_finite(r, x)
        return r
    raise TypeError(f"not an AST node: {node!r}")


def _check_finite(value: complex, x: float):
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise EvaluationError(f"non-finite value at x={x}")


def to_source(node: Node) -> str:
    """Render an AST back to parseable source."""
    return _render(node, 0)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4}


def _render(node, parent_prec):
    if isinstance(node, Const):
        v = complex(node.value)
        if v.imag == 0:
            real = v.real
            text = str(int(real)) if real == int(real) else repr(real)
            return f"({text})" if real < 0 and parent_prec > 1 else text
        if v.real == 0 and v.imag == 1:
            return "i"
        re_part = v.real
        im_part = v.imag
        parts = []
        if re_part:
            parts.append(str(int(re_part)) if re_part == int(re_part) else repr(re_part))
        imtext = str(int(im_part)) if im_part == int(im_part) else repr(im_part)
        parts.append(f"{imtext}*i")
        text = "+".join(parts).replace("+-", "-")
        return f"({text})"
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _render(node.arg, _PREC["neg"])
            text = f"-{inner}"
            return f"({text})" if parent_prec >= _PREC["neg"] else text
        return f"{node.op}({_render(node.arg, 0)})"
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left = _render(node.left, prec - 1)
        right = _render(node.right, prec)
        text = f"{left}{node.op}{right}"
        return f"({text})" if parent_prec >= prec else text
    if isinstance(node, Power):
        base = _render(node.base, _PREC["pow"])
        exp = node.exponent if node.exponent >= 0 else f"({node.exponent})"
        return f"{base}^{exp}"
    raise TypeError(f"not an AST node: {node!r}")
