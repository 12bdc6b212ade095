"""Exact arithmetic over Q(i) and the field of rational functions Q(i)(h).

``h`` stands for the real deformation parameter hbar, so complex conjugation
acts on coefficients only.  Everything here is exact: no floats are ever
created.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence


class SingularMatrixError(ArithmeticError):
    """Raised when elimination finds no usable pivot."""

    def __init__(self, column: int):
        super().__init__(f"matrix is singular: no nonzero pivot in column {column}")
        self.column = column


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


class GaussianRational:
    """An element (a + b*i)/d of Q(i), kept with d > 0 and gcd(a, b, d) = 1."""

    __slots__ = ("_a", "_b", "_d")

    def __init__(self, re=0, im=0):
        re = _to_fraction(re)
        im = _to_fraction(im)
        d = re.denominator * im.denominator // math.gcd(re.denominator, im.denominator)
        self._set(re.numerator * (d // re.denominator), im.numerator * (d // im.denominator), d)

    def _set(self, a: int, b: int, d: int) -> None:
        g = math.gcd(a, b, d)
        if g != 1:
            a //= g
            b //= g
            d //= g
        self._a, self._b, self._d = a, b, d

    @classmethod
    def _raw(cls, a: int, b: int, d: int) -> "GaussianRational":
        obj = object.__new__(cls)
        if d < 0:
            a, b, d = -a, -b, -d
        obj._set(a, b, d)
        return obj

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            raise TypeError("floating-point complex numbers are not exact")
        if isinstance(value, str):
            from .render import parse_gaussian_rational

            return parse_gaussian_rational(value)
        return cls(value)

    @property
    def re(self) -> Fraction:
        return Fraction(self._a, self._d)

    @property
    def im(self) -> Fraction:
        return Fraction(self._b, self._d)

    def is_real(self) -> bool:
        return self._b == 0

    def conjugate(self) -> "GaussianRational":
        if self._b == 0:
            return self
        obj = object.__new__(GaussianRational)
        obj._a, obj._b, obj._d = self._a, -self._b, self._d
        return obj

    def norm(self) -> Fraction:
        return Fraction(self._a * self._a + self._b * self._b, self._d * self._d)

    def __bool__(self) -> bool:
        return self._a != 0 or self._b != 0

    def __add__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, (int, Fraction)):
                other = GaussianRational(other)
            else:
                return NotImplemented
        d1, d2 = self._d, other._d
        if d1 == d2:
            return GaussianRational._raw(self._a + other._a, self._b + other._b, d1)
        return GaussianRational._raw(
            self._a * d2 + other._a * d1, self._b * d2 + other._b * d1, d1 * d2
        )

    __radd__ = __add__

    def __neg__(self):
        obj = object.__new__(GaussianRational)
        obj._a, obj._b, obj._d = -self._a, -self._b, self._d
        return obj

    def __sub__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, (int, Fraction)):
                other = GaussianRational(other)
            else:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, int):
                return GaussianRational._raw(self._a * other, self._b * other, self._d)
            if isinstance(other, Fraction):
                other = GaussianRational(other)
            else:
                return NotImplemented
        a1, b1, a2, b2 = self._a, self._b, other._a, other._b
        if b1 == 0 and b2 == 0:
            return GaussianRational._raw(a1 * a2, 0, self._d * other._d)
        return GaussianRational._raw(a1 * a2 - b1 * b2, a1 * b2 + a2 * b1, self._d * other._d)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        if not self:
            raise ZeroDivisionError("division by zero in Q(i)")
        a, b, d = self._a, self._b, self._d
        return GaussianRational._raw(a * d, -b * d, a * a + b * b)

    def __truediv__(self, other):
        if not isinstance(other, GaussianRational):
            if isinstance(other, (int, Fraction)):
                other = GaussianRational(other)
            else:
                return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = ONE
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self._a == other._a and self._b == other._b and self._d == other._d
        if isinstance(other, (int, Fraction)):
            return self._b == 0 and Fraction(self._a, self._d) == other
        return NotImplemented

    def __hash__(self):
        if self._b == 0:
            # Must agree with int and Fraction hashes, since those compare equal.
            return hash(self._a) if self._d == 1 else hash(Fraction(self._a, self._d))
        return hash((self._a, self._b, self._d))

    def __repr__(self):
        return f"GaussianRational({self})"

    def __str__(self):
        from .render import format_gaussian_rational

        return format_gaussian_rational(self)


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I_UNIT = GaussianRational(0, 1)


def _strip(coeffs: list) -> tuple:
    while coeffs and not coeffs[-1]:
        coeffs.pop()
    return tuple(coeffs)


class HbarPolynomial:
    """Polynomial in h with Q(i) coefficients, stored in ascending order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        self.coeffs = _strip([GaussianRational.coerce(c) for c in coeffs])

    @classmethod
    def _from_tuple(cls, coeffs: tuple) -> "HbarPolynomial":
        obj = object.__new__(cls)
        obj.coeffs = coeffs
        return obj

    @classmethod
    def constant(cls, value) -> "HbarPolynomial":
        return cls((value,))

    @classmethod
    def monomial(cls, power: int, coeff=1) -> "HbarPolynomial":
        return cls([ZERO] * power + [GaussianRational.coerce(coeff)])

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def leading(self) -> GaussianRational:
        return self.coeffs[-1] if self.coeffs else ZERO

    def valuation(self) -> int:
        """Lowest power of h with a nonzero coefficient (-1 for zero)."""
        for k, c in enumerate(self.coeffs):
            if c:
                return k
        return -1

    def coefficient(self, power: int) -> GaussianRational:
        if 0 <= power < len(self.coeffs):
            return self.coeffs[power]
        return ZERO

    def __add__(self, other):
        if not isinstance(other, HbarPolynomial):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for k, c in enumerate(b):
            out[k] = out[k] + c
        return HbarPolynomial._from_tuple(_strip(out))

    def __neg__(self):
        return HbarPolynomial._from_tuple(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        if not isinstance(other, HbarPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, GaussianRational):
            if not other:
                return HbarPolynomial._from_tuple(())
            return HbarPolynomial._from_tuple(tuple(c * other for c in self.coeffs))
        if not isinstance(other, HbarPolynomial):
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        if not a or not b:
            return HbarPolynomial._from_tuple(())
        if len(b) == 1:
            return self * b[0]
        if len(a) == 1:
            return other * a[0]
        # Convolve over Z[i] after clearing denominators; normalize once per coefficient.
        ra, ia, da = _integral(a)
        rb, ib, db = _integral(b)
        size = len(a) + len(b) - 1
        re = [0] * size
        im = [0] * size
        real = not any(ia) and not any(ib)
        for i, (x, xi) in enumerate(zip(ra, ia)):
            if not x and not xi:
                continue
            for j, (y, yi) in enumerate(zip(rb, ib)):
                if real:
                    re[i + j] += x * y
                else:
                    re[i + j] += x * y - xi * yi
                    im[i + j] += x * yi + xi * y
        d = da * db
        return HbarPolynomial._from_tuple(_strip([GaussianRational._raw(r, s, d) for r, s in zip(re, im)]))

    def scale(self, c: GaussianRational) -> "HbarPolynomial":
        return self * c

    def shift(self, power: int) -> "HbarPolynomial":
        """Multiply by h**power."""
        if not self.coeffs or power == 0:
            return self
        return HbarPolynomial._from_tuple((ZERO,) * power + self.coeffs)

    def truncate(self, order: int) -> "HbarPolynomial":
        """Reduce modulo h**order."""
        return HbarPolynomial._from_tuple(_strip(list(self.coeffs[:order])))

    def divmod(self, other: "HbarPolynomial") -> tuple["HbarPolynomial", "HbarPolynomial"]:
        if not other:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dd = other.degree
        if len(rem) - 1 < dd:
            return HbarPolynomial._from_tuple(()), self
        inv_lead = other.coeffs[-1].inverse()
        quo = [ZERO] * (len(rem) - dd)
        dcoeffs = other.coeffs
        for k in range(len(rem) - 1 - dd, -1, -1):
            c = rem[k + dd]
            if not c:
                continue
            q = c * inv_lead
            quo[k] = q
            for j in range(dd):
                if dcoeffs[j]:
                    rem[k + j] = rem[k + j] - q * dcoeffs[j]
            rem[k + dd] = ZERO
        return HbarPolynomial._from_tuple(_strip(quo)), HbarPolynomial._from_tuple(_strip(rem[:dd]))

    def exact_div(self, other: "HbarPolynomial") -> "HbarPolynomial":
        q, r = self.divmod(other)
        if r:
            raise ArithmeticError("polynomial division is not exact")
        return q

    def make_monic(self) -> "HbarPolynomial":
        lead = self.leading()
        if not lead or lead == ONE:
            return self
        return self * lead.inverse()

    def conjugate(self) -> "HbarPolynomial":
        return HbarPolynomial._from_tuple(tuple(c.conjugate() for c in self.coeffs))

    def evaluate(self, value) -> GaussianRational:
        value = GaussianRational.coerce(value)
        acc = ZERO
        for c in reversed(self.coeffs):
            acc = acc * value + c
        return acc

    def __eq__(self, other):
        if isinstance(other, HbarPolynomial):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"HbarPolynomial({self})"

    def __str__(self):
        from .render import format_polynomial

        return format_polynomial(self)


def _integral(coeffs: tuple) -> tuple[list[int], list[int], int]:
    """Real parts, imaginary parts and common denominator of a coefficient tuple."""
    d = math.lcm(*(c._d for c in coeffs))
    return [c._a * (d // c._d) for c in coeffs], [c._b * (d // c._d) for c in coeffs], d


def poly_gcd(a: HbarPolynomial, b: HbarPolynomial) -> HbarPolynomial:
    """Monic gcd over Q(i); gcd(0, 0) is 0."""
    if a.degree < b.degree:
        a, b = b, a
    if not b:
        return a.make_monic()
    if b.degree == 0:
        return _POLY_ONE
    if b.degree == 1:
        # Linear case: b divides a iff the root of b is a root of a.
        root = -(b.coeffs[0] / b.coeffs[1])
        return b.make_monic() if not a.evaluate(root) else _POLY_ONE
    while b:
        _, r = a.divmod(b)
        a, b = b, r.make_monic()
        if b.degree == 0:
            return _POLY_ONE
    return a.make_monic()


_POLY_ONE = HbarPolynomial((1,))
_POLY_ZERO = HbarPolynomial(())
_POLY_H = HbarPolynomial((0, 1))


class GaussianRationalFunction:
    """Element num/den of Q(i)(h) in lowest terms.

    The denominator is normalized so that its lowest-order nonzero
    coefficient is 1; for the usual case den(0) != 0 that makes the constant
    term 1, which matches how these functions are read as power series in h.
    """

    __slots__ = ("num", "den")

    def __init__(self, num=0, den=None):
        if not isinstance(num, HbarPolynomial):
            num = HbarPolynomial.constant(GaussianRational.coerce(num))
        if den is None:
            den = _POLY_ONE
        elif not isinstance(den, HbarPolynomial):
            den = HbarPolynomial.constant(GaussianRational.coerce(den))
        if not den:
            raise ZeroDivisionError("rational function with zero denominator")
        self._assign_reduced(num, den, poly_gcd(num, den) if num else den)

    def _assign_reduced(self, num, den, g):
        if not num:
            self.num, self.den = _POLY_ZERO, _POLY_ONE
            return
        if g.degree > 0:
            num = num.exact_div(g)
            den = den.exact_div(g)
        lead = den.coefficient(den.valuation())
        if lead != ONE:
            inv = lead.inverse()
            num = num * inv
            den = den * inv
        self.num, self.den = num, den

    @classmethod
    def _make(cls, num: HbarPolynomial, den: HbarPolynomial, g=None) -> "GaussianRationalFunction":
        obj = object.__new__(cls)
        if g is None:
            g = poly_gcd(num, den) if num and den.degree > 0 else _POLY_ONE
        obj._assign_reduced(num, den, g)
        return obj

    @classmethod
    def _trusted(cls, num: HbarPolynomial, den: HbarPolynomial) -> "GaussianRationalFunction":
        obj = object.__new__(cls)
        obj.num, obj.den = num, den
        return obj

    @classmethod
    def coerce(cls, value) -> "GaussianRationalFunction":
        if isinstance(value, GaussianRationalFunction):
            return value
        if isinstance(value, HbarPolynomial):
            return cls._trusted(value, _POLY_ONE)
        if isinstance(value, str):
            from .render import parse_rational_function

            return parse_rational_function(value)
        return cls._trusted(HbarPolynomial.constant(GaussianRational.coerce(value)), _POLY_ONE)

    @classmethod
    def hbar(cls, power: int = 1) -> "GaussianRationalFunction":
        return cls._trusted(HbarPolynomial.monomial(power), _POLY_ONE)

    def __bool__(self) -> bool:
        return bool(self.num)

    def is_polynomial(self) -> bool:
        return self.den.degree == 0

    def is_constant(self) -> bool:
        return self.num.degree <= 0 and self.den.degree == 0

    def constant_value(self) -> GaussianRational:
        if not self.is_constant():
            raise ValueError("rational function is not constant")
        return self.num.coefficient(0)

    def __add__(self, other):
        if not isinstance(other, GaussianRationalFunction):
            try:
                other = GaussianRationalFunction.coerce(other)
            except TypeError:
                return NotImplemented
        if not other.num:
            return self
        if not self.num:
            return other
        d1, d2 = self.den, other.den
        if d1 == d2:
            if d1.degree == 0:
                return GaussianRationalFunction._make(self.num + other.num, d1, _POLY_ONE)
            return GaussianRationalFunction._make(self.num + other.num, d1)
        g = poly_gcd(d1, d2)
        if g.degree == 0:
            num = self.num * d2 + other.num * d1
            den = d1 * d2
            # Denominators were coprime, so no cancellation is possible.
            return GaussianRationalFunction._make(num, den, _POLY_ONE)
        d1g = d1.exact_div(g)
        d2g = d2.exact_div(g)
        num = self.num * d2g + other.num * d1g
        den = d1g * d2
        g2 = poly_gcd(num, g) if num else _POLY_ONE
        return GaussianRationalFunction._make(num, den, g2)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRationalFunction._trusted(-self.num, self.den)

    def __sub__(self, other):
        if not isinstance(other, GaussianRationalFunction):
            try:
                other = GaussianRationalFunction.coerce(other)
            except TypeError:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, GaussianRational):
            if not other:
                return ZERO_RF
            return GaussianRationalFunction._trusted(self.num * other, self.den)
        if not isinstance(other, GaussianRationalFunction):
            try:
                other = GaussianRationalFunction.coerce(other)
            except TypeError:
                return NotImplemented
        if not self.num or not other.num:
            return ZERO_RF
        n1, d1, n2, d2 = self.num, self.den, other.num, other.den
        if d1.degree == 0 and d2.degree == 0:
            return GaussianRationalFunction._trusted(n1 * n2, _POLY_ONE)
        g1 = poly_gcd(n1, d2) if d2.degree > 0 else _POLY_ONE
        g2 = poly_gcd(n2, d1) if d1.degree > 0 else _POLY_ONE
        if g1.degree > 0:
            n1 = n1.exact_div(g1)
            d2 = d2.exact_div(g1)
        if g2.degree > 0:
            n2 = n2.exact_div(g2)
            d1 = d1.exact_div(g2)
        return GaussianRationalFunction._make(n1 * n2, d1 * d2, _POLY_ONE)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRationalFunction":
        if not self.num:
            raise ZeroDivisionError("division by zero in Q(i)(h)")
        return GaussianRationalFunction._make(self.den, self.num, _POLY_ONE)

    def __truediv__(self, other):
        if not isinstance(other, GaussianRationalFunction):
            try:
                other = GaussianRationalFunction.coerce(other)
            except TypeError:
                return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return GaussianRationalFunction.coerce(other) * self.inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = ONE_RF
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conjugate(self) -> "GaussianRationalFunction":
        return GaussianRationalFunction._trusted(self.num.conjugate(), self.den.conjugate())

    def series(self, order: int) -> HbarPolynomial:
        """Power series expansion truncated modulo h**order."""
        d0 = self.den.coefficient(0)
        if not d0:
            raise ValueError("denominator vanishes at h = 0; no power series")
        inv0 = d0.inverse()
        out: list[GaussianRational] = []
        den = self.den.coeffs
        for k in range(order):
            acc = self.num.coefficient(k)
            for j in range(1, min(k, len(den) - 1) + 1):
                acc = acc - den[j] * out[k - j]
            out.append(acc * inv0)
        return HbarPolynomial(out)

    def valuation(self) -> int:
        """h-adic order: valuation of num minus valuation of den."""
        if not self.num:
            raise ValueError("zero has infinite valuation")
        return self.num.valuation() - self.den.valuation()

    def evaluate(self, value) -> GaussianRational:
        return self.num.evaluate(value) / self.den.evaluate(value)

    def __eq__(self, other):
        if not isinstance(other, GaussianRationalFunction):
            try:
                other = GaussianRationalFunction.coerce(other)
            except TypeError:
                return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"GaussianRationalFunction({self})"

    def __str__(self):
        from .render import format_rational_function

        return format_rational_function(self)


ZERO_RF = GaussianRationalFunction._trusted(_POLY_ZERO, _POLY_ONE)
ONE_RF = GaussianRationalFunction._trusted(_POLY_ONE, _POLY_ONE)
HBAR = GaussianRationalFunction.hbar()


def rf(value) -> GaussianRationalFunction:
    """Shorthand coercion to Q(i)(h)."""
    return GaussianRationalFunction.coerce(value)


def gr(re=0, im=0) -> GaussianRational:
    return GaussianRational(re, im)


class FieldMatrix:
    """Dense rectangular matrix over Q(i)(h)."""

    __slots__ = ("rows",)

    def __init__(self, rows: Sequence[Sequence]):
        built = tuple(tuple(rf(x) for x in row) for row in rows)
        width = {len(r) for r in built}
        if len(width) > 1:
            raise ValueError("ragged matrix rows")
        self.rows = built

    @classmethod
    def _wrap(cls, rows) -> "FieldMatrix":
        obj = object.__new__(cls)
        obj.rows = tuple(tuple(r) for r in rows)
        return obj

    @classmethod
    def zeros(cls, nrows: int, ncols: int | None = None) -> "FieldMatrix":
        ncols = nrows if ncols is None else ncols
        return cls._wrap([[ZERO_RF] * ncols for _ in range(nrows)])

    @classmethod
    def identity(cls, size: int) -> "FieldMatrix":
        return cls.diagonal([ONE_RF] * size)

    @classmethod
    def diagonal(cls, values: Sequence) -> "FieldMatrix":
        size = len(values)
        rows = [[ZERO_RF] * size for _ in range(size)]
        for k, v in enumerate(values):
            rows[k][k] = rf(v)
        return cls._wrap(rows)

    @classmethod
    def down_shift(cls, size: int, power: int = 1) -> "FieldMatrix":
        """Ones on the subdiagonal ``power`` steps below the diagonal."""
        rows = [[ZERO_RF] * size for _ in range(size)]
        for k in range(size - power):
            rows[k + power][k] = ONE_RF
        return cls._wrap(rows)

    @classmethod
    def right_shift(cls, size: int, power: int = 1) -> "FieldMatrix":
        """Ones on the superdiagonal; right multiplication shifts columns right."""
        return cls.down_shift(size, power).transpose()

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), (len(self.rows[0]) if self.rows else 0)

    def __getitem__(self, key):
        i, j = key
        return self.rows[i][j]

    def __iter__(self):
        return iter(self.rows)

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_same(other)
        return FieldMatrix._wrap(
            [[x + y for x, y in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)]
        )

    def __sub__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_same(other)
        return FieldMatrix._wrap(
            [[x - y for x, y in zip(r1, r2)] for r1, r2 in zip(self.rows, other.rows)]
        )

    def __neg__(self):
        return FieldMatrix._wrap([[-x for x in r] for r in self.rows])

    def _check_same(self, other):
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def scale(self, c) -> "FieldMatrix":
        c = c if isinstance(c, GaussianRational) else rf(c)
        if isinstance(c, GaussianRationalFunction) and c.is_constant():
            c = c.constant_value()
        return FieldMatrix._wrap([[x * c for x in r] for r in self.rows])

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        n, m = self.shape
        m2, p = other.shape
        if m != m2:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        cols = list(zip(*other.rows)) if other.rows else [()] * p
        out = []
        for row in self.rows:
            nz = [(k, x) for k, x in enumerate(row) if x]
            out_row = []
            for col in cols:
                terms = [x * col[k] for k, x in nz if col[k]]
                out_row.append(rf_sum(terms))
            out.append(out_row)
        return FieldMatrix._wrap(out)

    def transpose(self) -> "FieldMatrix":
        return FieldMatrix._wrap(list(zip(*self.rows)))

    def conjugate(self) -> "FieldMatrix":
        return FieldMatrix._wrap([[x.conjugate() for x in r] for r in self.rows])

    def dagger(self) -> "FieldMatrix":
        """Conjugate transpose (h is real)."""
        return self.conjugate().transpose()

    def is_zero(self) -> bool:
        return not any(x for r in self.rows for x in r)

    def block(self, nrows: int, ncols: int) -> "FieldMatrix":
        return FieldMatrix._wrap([r[:ncols] for r in self.rows[:nrows]])

    def padded(self, size: int) -> "FieldMatrix":
        """Embed in the top-left corner of a size x size zero matrix."""
        n, m = self.shape
        rows = [list(r) + [ZERO_RF] * (size - m) for r in self.rows]
        rows += [[ZERO_RF] * size for _ in range(size - n)]
        return FieldMatrix._wrap(rows)

    def map(self, fn) -> "FieldMatrix":
        return FieldMatrix._wrap([[fn(x) for x in r] for r in self.rows])

    def first_difference(self, other: "FieldMatrix"):
        """First (i, j, mine, theirs) where the matrices differ, else None."""
        self._check_same(other)
        for i, (r1, r2) in enumerate(zip(self.rows, other.rows)):
            for j, (x, y) in enumerate(zip(r1, r2)):
                if x != y:
                    return i, j, x, y
        return None

    def __eq__(self, other):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        body = "; ".join(", ".join(str(x) for x in r) for r in self.rows)
        return f"FieldMatrix([{body}])"

    def inverse(self) -> "FieldMatrix":
        n, m = self.shape
        if n != m:
            raise ValueError("only square matrices can be inverted")
        return matrix_right_solve(FieldMatrix.identity(n), self)


def rf_sum(terms: list) -> GaussianRationalFunction:
    """Sum of rational functions, grouping terms that share a denominator."""
    if not terms:
        return ZERO_RF
    if len(terms) == 1:
        return terms[0]
    groups: dict[HbarPolynomial, HbarPolynomial] = {}
    for t in terms:
        if t.den in groups:
            groups[t.den] = groups[t.den] + t.num
        else:
            groups[t.den] = t.num
    acc = ZERO_RF
    for den, num in groups.items():
        if num:
            acc = acc + GaussianRationalFunction._make(num, den)
    return acc


def matrix_right_solve(B: FieldMatrix, X: FieldMatrix) -> FieldMatrix:
    """Solve T @ X = B for T by exact Gauss-Jordan elimination.

    Equivalent to solving X^T T^T = B^T; we eliminate on the columns of X
    directly so no transposes are materialized.  Raises SingularMatrixError
    naming the column where no pivot exists.
    """
    n, m = X.shape
    if n != m:
        raise ValueError("right solve needs a square coefficient matrix")
    rb, cb = B.shape
    if cb != n:
        raise ValueError(f"right-hand side has {cb} columns, expected {n}")
    # Work with the transposed system: rows of W = X^T, right-hand sides = B^T.
    W = [list(col) for col in zip(*X.rows)]
    R = [list(col) for col in zip(*B.rows)] if rb else [[] for _ in range(n)]
    for c in range(n):
        pivot = None
        best = None
        for r in range(c, n):
            x = W[r][c]
            if x:
                cost = (x.num.degree + x.den.degree, len(str(x.num.coeffs)))
                if best is None or cost < best:
                    pivot, best = r, cost
                    if cost[0] == 0:
                        break
        if pivot is None:
            raise SingularMatrixError(c)
        if pivot != c:
            W[c], W[pivot] = W[pivot], W[c]
            R[c], R[pivot] = R[pivot], R[c]
        inv = W[c][c].inverse()
        if inv != ONE_RF:
            W[c] = [x * inv if x else x for x in W[c]]
            R[c] = [x * inv if x else x for x in R[c]]
        prow, prhs = W[c], R[c]
        for r in range(n):
            if r == c:
                continue
            f = W[r][c]
            if not f:
                continue
            W[r] = [x - f * y if y else x for x, y in zip(W[r], prow)]
            R[r] = [x - f * y if y else x for x, y in zip(R[r], prhs)]
    return FieldMatrix._wrap(list(zip(*R)) if rb else [])


def binom(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)
