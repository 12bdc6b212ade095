"""Text form of exact values and its inverse.

Grammar produced here:

* a Q(i) coefficient is ``a``, ``a/b`` or ``(a+b*i)/d`` (``/d`` dropped when
  d is 1, ``b*i`` written ``i`` when b is 1);
* a polynomial in ``h`` lists terms by ascending power as ``c``, ``c*h`` or
  ``c*h^k``, joined by `` + `` / `` - ``;
* a rational function is ``num`` or ``num/(den)``, with ``num`` wrapped in
  parentheses when it has more than one term.

Parsing goes through Python's own expression parser, so anything written
with ``+ - * / ^`` and parentheses over integers, ``i`` and ``h`` is accepted.
"""

from __future__ import annotations

import ast
from fractions import Fraction
from typing import Callable, Mapping

from .exactalg import (
    GaussianRational,
    GaussianRationalFunction,
    HbarPolynomial,
    I_UNIT,
    HBAR,
)


def _frac_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def format_gaussian_rational(c: GaussianRational) -> str:
    a, b, d = c._a, c._b, c._d
    if b == 0:
        return _frac_text(Fraction(a, d))
    if b == 1:
        imag = "i"
    elif b == -1:
        imag = "-i"
    else:
        imag = f"{b}*i"
    if a == 0:
        inner = imag
    else:
        sign = "-" if imag.startswith("-") else "+"
        inner = f"{a}{sign}{imag.lstrip('-')}"
    if d == 1:
        return f"({inner})"
    return f"({inner})/{d}"


def _monomial(power: int) -> str:
    return "h" if power == 1 else f"h^{power}"


def _term_text(c: GaussianRational, power: int) -> tuple[str, str]:
    """Return (sign, body) for one polynomial term."""
    negative = c.is_real() and c.re < 0
    mag = -c if negative else c
    sign = "-" if negative else "+"
    if power == 0:
        return sign, str(mag)
    if mag == 1:
        return sign, _monomial(power)
    return sign, f"{mag}*{_monomial(power)}"


def format_polynomial(p: HbarPolynomial) -> str:
    parts = [_term_text(c, k) for k, c in enumerate(p.coeffs) if c]
    if not parts:
        return "0"
    sign, body = parts[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


def format_rational_function(f: GaussianRationalFunction) -> str:
    num = format_polynomial(f.num)
    if f.den.degree == 0 and f.den.coefficient(0) == 1:
        return num
    if sum(1 for c in f.num.coeffs if c) > 1:
        num = f"({num})"
    return f"{num}/({format_polynomial(f.den)})"


class ParseError(ValueError):
    pass


_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


def evaluate_expression(
    text: str,
    variables: Mapping[str, object],
    lift: Callable[[int], object],
    allow_division: Callable[[object], bool] = lambda _: True,
):
    """Evaluate an arithmetic expression over a user-supplied ring.

    ``variables`` maps names to ring elements, ``lift`` embeds integers.
    ``^`` is read as exponentiation; exponents must be nonnegative integer
    literals.  ``allow_division`` vets each divisor.
    """
    source = text.strip().replace("^", "**")
    if not source:
        raise ParseError("empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}") from None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and type(node.value) is int:
            return lift(node.value)
        if isinstance(node, ast.Name):
            if node.id not in variables:
                raise ParseError(f"unknown symbol {node.id!r} in {text!r}")
            return variables[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = walk(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
            if isinstance(node.op, ast.Pow):
                exp = node.right
                if not (isinstance(exp, ast.Constant) and type(exp.value) is int and exp.value >= 0):
                    raise ParseError(f"exponent must be a nonnegative integer in {text!r}")
                return walk(node.left) ** exp.value
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if not allow_division(right):
                raise ParseError(f"unsupported division in {text!r}")
            try:
                return left / right
            except ZeroDivisionError:
                raise ParseError(f"division by zero in {text!r}") from None
        raise ParseError(f"unsupported syntax in {text!r}")

    return walk(tree)


def parse_rational_function(text: str) -> GaussianRationalFunction:
    return evaluate_expression(
        text, {"h": HBAR, "i": GaussianRationalFunction.coerce(I_UNIT)}, GaussianRationalFunction.coerce
    )


def parse_gaussian_rational(text: str) -> GaussianRational:
    if not isinstance(text, str):
        raise ParseError(f"expected a string, got {type(text).__name__}")
    value = evaluate_expression(text, {"i": I_UNIT}, GaussianRational)
    return GaussianRational.coerce(value)
