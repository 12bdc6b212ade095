"""Star products of polynomials on flat C².

Functions are polynomials in z1, z2, zb1, zb2 with coefficients in Q(i)(h).
With a constant metric the operators D^k = g^{k l̄} ∂_{l̄} and
D^{k̄} = g^{k̄ l} ∂_l have constant coefficients, so every star product of
polynomials is a finite sum.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from math import factorial, perm

from .engine import StarCoefficients
from .exactalg import (
    HBAR,
    ONE_RF,
    GaussianRational,
    GaussianRationalFunction,
    I_UNIT,
    rf,
    rf_sum,
)
from .kahler import HermitianMetric2
from .multipoly import VARIABLES, SparsePoly, format_sparse
from .render import evaluate_expression

HOLO = (0, 1)
ANTI = (2, 3)
FLAT_METRIC = HermitianMetric2([["1/2", 0], [0, "1/2"]])


class PhaseSpacePolynomial(SparsePoly):
    """Polynomial in z1, z2, zb1, zb2 over Q(i)(h)."""

    __slots__ = ()

    def __init__(self, terms=()):
        items = terms.items() if isinstance(terms, dict) else terms
        super().__init__([(e, rf(c)) for e, c in items])

    @classmethod
    def _wrap(cls, terms: dict) -> "PhaseSpacePolynomial":
        obj = object.__new__(cls)
        obj.terms = terms
        return obj

    @classmethod
    def lift(cls, p: SparsePoly) -> "PhaseSpacePolynomial":
        if isinstance(p, PhaseSpacePolynomial):
            return p
        return cls._wrap({e: rf(c) for e, c in p.terms.items()})

    @classmethod
    def one(cls) -> "PhaseSpacePolynomial":
        return cls._wrap({(0, 0, 0, 0): ONE_RF})

    @classmethod
    def monomial(cls, exponent, coeff=1) -> "PhaseSpacePolynomial":
        return cls({tuple(exponent): coeff})

    @classmethod
    def parse(cls, text: str) -> "PhaseSpacePolynomial":
        """Read an expression in z1, z2, zb1, zb2, h and i (``^`` for powers)."""
        env = {name: cls.monomial(tuple(int(k == idx) for k in range(4))) for idx, name in enumerate(VARIABLES)}
        env["h"] = cls._wrap({(0, 0, 0, 0): HBAR})
        env["i"] = cls._wrap({(0, 0, 0, 0): rf(I_UNIT)})
        value = evaluate_expression(
            text,
            env,
            lambda n: cls._wrap({(0, 0, 0, 0): rf(n)} if n else {}),
            allow_division=lambda d: isinstance(d, PhaseSpacePolynomial) and _constant_term_only(d),
        )
        return cls.lift(value)

    def __truediv__(self, other):
        if isinstance(other, PhaseSpacePolynomial):
            if not _constant_term_only(other):
                raise ValueError("can only divide a polynomial by a constant")
            other = other.terms[(0, 0, 0, 0)]
        inv = rf(other).inverse()
        return self.scale(inv)

    def __add__(self, other):
        return PhaseSpacePolynomial.lift(SparsePoly.__add__(self, other))

    def __sub__(self, other):
        return PhaseSpacePolynomial.lift(SparsePoly.__sub__(self, other))

    def __neg__(self):
        return PhaseSpacePolynomial.lift(SparsePoly.__neg__(self))

    def __mul__(self, other):
        return PhaseSpacePolynomial.lift(SparsePoly.__mul__(self, other))

    def __pow__(self, k: int):
        out = PhaseSpacePolynomial.one()
        for _ in range(k):
            out = out * self
        return out

    def scale(self, c):
        return PhaseSpacePolynomial.lift(SparsePoly.scale(self, rf(c)))

    def derivative(self, var: int, times: int = 1):
        return PhaseSpacePolynomial.lift(SparsePoly.derivative(self, var, times))

    def conjugate(self):
        return PhaseSpacePolynomial.lift(SparsePoly.conjugate(self))

    def hbar_coefficient(self, power: int) -> "PhaseSpacePolynomial":
        """Coefficient of h^power, treating coefficients as power series in h."""
        out = {}
        for e, c in self.terms.items():
            val = c.series(power + 1).coefficient(power)
            if val:
                out[e] = rf(val)
        return PhaseSpacePolynomial._wrap(out)

    def is_holomorphic(self) -> bool:
        return all(e[2] == 0 and e[3] == 0 for e in self.terms)

    def is_antiholomorphic(self) -> bool:
        return all(e[0] == 0 and e[1] == 0 for e in self.terms)

    def __str__(self):
        return format_sparse(self)

    def __repr__(self):
        return f"PhaseSpacePolynomial({self})"


def _constant_term_only(p) -> bool:
    return isinstance(p, SparsePoly) and set(p.terms) <= {(0, 0, 0, 0)} and bool(p.terms)


def _flat_metric(coeffs: StarCoefficients | None) -> HermitianMetric2:
    if coeffs is None:
        return FLAT_METRIC
    if not coeffs.geometry.curvature.is_zero():
        raise ValueError("the polynomial sandbox only supports flat geometries (zero curvature)")
    return coeffs.geometry.metric


def apply_D(f: PhaseSpacePolynomial, direction: tuple[str, int], metric: HermitianMetric2 = FLAT_METRIC) -> PhaseSpacePolynomial:
    """Apply D^k (``("holo", k)``) or D^{k̄} (``("anti", k)``), k in {1, 2}."""
    kind, k = direction
    if k not in (1, 2):
        raise ValueError("direction index must be 1 or 2")
    k -= 1
    out = PhaseSpacePolynomial._wrap({})
    for l in range(2):
        if kind == "holo":
            # D^k = g^{k l̄} ∂_{l̄}, and g^{k l̄} = g^{l̄ k}.
            coeff, var = metric.upper(l, k), ANTI[l]
        elif kind == "anti":
            coeff, var = metric.upper(k, l), HOLO[l]
        else:
            raise ValueError(f"direction kind must be 'holo' or 'anti', not {kind!r}")
        if coeff:
            out = out + f.derivative(var).scale(rf(coeff))
    return out


def _apply_power(f: PhaseSpacePolynomial, kind: str, counts: tuple[int, int], metric) -> PhaseSpacePolynomial:
    for k, times in enumerate(counts, start=1):
        for _ in range(times):
            if not f:
                return f
            f = apply_D(f, (kind, k), metric)
    return f


def required_order(f: PhaseSpacePolynomial, g: PhaseSpacePolynomial) -> int:
    """Highest order at which f ∗ g can still have nonzero terms."""
    return min(f.antiholo_degree(), g.holo_degree())


class InsufficientOrderError(ValueError):
    pass


class BidifferentialKernel:
    """Constant-coefficient operator Σ K[r, s] ∂_{zb}^r f · ∂_z^s g.

    ``entries`` maps r = (r1, r2) to a list of (s, value) with s = (s1, s2).
    Scaled values are memoized because sweeps over many monomials reuse the
    same few (entry, multiplier) combinations.
    """

    _MEMO_LIMIT = 200_000

    def __init__(self, entries: dict[tuple[int, int], list[tuple[tuple[int, int], GaussianRationalFunction]]]):
        self.entries = {r: [(s, v, (r, s)) for s, v in row if v] for r, row in entries.items()}
        self.entries = {r: row for r, row in self.entries.items() if row}
        self._scaled: dict = {}

    def _scaled_value(self, key, value, multiplier):
        memo_key = (key, multiplier)
        out = self._scaled.get(memo_key)
        if out is None:
            if len(self._scaled) > self._MEMO_LIMIT:
                self._scaled.clear()
            out = value * multiplier
            self._scaled[memo_key] = out
        return out

    def apply(self, f: "PhaseSpacePolynomial", g: "PhaseSpacePolynomial") -> "PhaseSpacePolynomial":
        acc: dict = {}
        for (a1, a2, b1, b2), cf in f.terms.items():
            cf_const = cf.constant_value() if cf.is_constant() else None
            for (c1, c2, d1, d2), cg in g.terms.items():
                if cf_const is not None and cg.is_constant():
                    scalar, generic = cf_const * cg.constant_value(), None
                    if scalar._b == 0 and scalar._d == 1:
                        scalar = scalar._a
                else:
                    scalar, generic = None, cf * cg
                for r1 in range(b1 + 1):
                    for r2 in range(b2 + 1):
                        row = self.entries.get((r1, r2))
                        if row is None:
                            continue
                        left = perm(b1, r1) * perm(b2, r2)
                        for (s1, s2), value, key in row:
                            if s1 > c1 or s2 > c2:
                                continue
                            mult = left * perm(c1, s1) * perm(c2, s2)
                            if generic is None:
                                term = self._scaled_value(key, value, scalar * mult)
                            else:
                                term = value * generic * mult
                            e = (a1 + c1 - s1, a2 + c2 - s2, b1 - r1 + d1, b2 - r2 + d2)
                            prev = acc.get(e)
                            acc[e] = term if prev is None else prev + term
        return PhaseSpacePolynomial._wrap({e: c for e, c in acc.items() if c})


def _power_weights(u1: tuple, u2: tuple, p: int, q: int) -> dict[int, GaussianRational]:
    """Coefficients of x^r y^(p+q-r) in (u1[0] x + u1[1] y)^p (u2[0] x + u2[1] y)^q."""
    poly = {0: GaussianRational(1)}
    for lin in [u1] * p + [u2] * q:
        nxt: dict[int, GaussianRational] = {}
        for r, c in poly.items():
            for dr, w in ((1, lin[0]), (0, lin[1])):
                if w:
                    nxt[r + dr] = nxt.get(r + dr, GaussianRational(0)) + c * w
        poly = {r: c for r, c in nxt.items() if c}
    return poly


def star_kernel(coeffs: StarCoefficients, order: int) -> BidifferentialKernel:
    """Kernel of Σ_{n ≤ order} Σ_{a,b} T_n[a][b] (D^1)^{n-a} (D^2)^a ⊗ (D^1̄)^{n-b} (D^2̄)^b.

    Cached on ``coeffs`` and rebuilt if any table it was built from changes.
    """
    metric = _flat_metric(coeffs)
    tables = tuple(coeffs.tables[: order + 1])
    cached = coeffs.memo.get("star_kernel")
    if cached is not None and len(cached[0]) >= len(tables) and all(x is y for x, y in zip(cached[0], tables)):
        return cached[1]
    # D^k = Σ_l g^{l̄ k} ∂_{zb_l};  D^{k̄} = Σ_l g^{k̄ l} ∂_{z_l}.
    holo = [(metric.upper(0, k), metric.upper(1, k)) for k in range(2)]
    anti = [(metric.upper(k, 0), metric.upper(k, 1)) for k in range(2)]
    entries: dict = {}
    for n, T in enumerate(tables):
        left = [_power_weights(holo[0], holo[1], n - a, a) for a in range(n + 1)]
        right = [_power_weights(anti[0], anti[1], n - b, b) for b in range(n + 1)]
        block: dict[tuple[int, int], list] = {}
        for a in range(n + 1):
            for b in range(n + 1):
                t = T.rows[a][b]
                if not t:
                    continue
                for r, wl in left[a].items():
                    for s, wr in right[b].items():
                        key = ((r, n - r), (s, n - s))
                        block[key] = block.get(key, []) + [t * (wl * wr)]
        for (r, s), terms in block.items():
            total = rf_sum(terms)
            if total:
                entries.setdefault(r, []).append((s, total))
    kernel = BidifferentialKernel(entries)
    coeffs.memo["star_kernel"] = (tables, kernel)
    return kernel


def star_product(f: PhaseSpacePolynomial, g: PhaseSpacePolynomial, coeffs: StarCoefficients) -> PhaseSpacePolynomial:
    """f ∗ g = Σ_n Σ_{a,b} T_n[a][b] (D^1)^{n-a} (D^2)^a f · (D^1̄)^{n-b} (D^2̄)^b g."""
    f, g = PhaseSpacePolynomial.lift(f), PhaseSpacePolynomial.lift(g)
    _flat_metric(coeffs)
    need = required_order(f, g)
    if coeffs.max_order < need:
        raise InsufficientOrderError(f"star product needs coefficients up to order {need}, have {coeffs.max_order}")
    return star_kernel(coeffs, coeffs.max_order).apply(f, g)


def star_product_via_operators(f: PhaseSpacePolynomial, g: PhaseSpacePolynomial, coeffs: StarCoefficients) -> PhaseSpacePolynomial:
    """Same product, applying the D operators one at a time (slow, independent route)."""
    metric = _flat_metric(coeffs)
    f, g = PhaseSpacePolynomial.lift(f), PhaseSpacePolynomial.lift(g)
    need = required_order(f, g)
    if coeffs.max_order < need:
        raise InsufficientOrderError(f"star product needs coefficients up to order {need}, have {coeffs.max_order}")
    result = PhaseSpacePolynomial._wrap({})
    for n in range(need + 1):
        T = coeffs[n]
        left = [_apply_power(f, "holo", (n - a, a), metric) for a in range(n + 1)]
        right = [_apply_power(g, "anti", (n - b, b), metric) for b in range(n + 1)]
        for a in range(n + 1):
            if not left[a]:
                continue
            for b in range(n + 1):
                t = T.rows[a][b]
                if t and right[b]:
                    result = result + (left[a] * right[b]).scale(t)
    return result


_VOROS_KERNELS: dict = {}


def _voros_kernel(nu: GaussianRationalFunction, degree: int) -> BidifferentialKernel:
    key = (nu, degree)
    kernel = _VOROS_KERNELS.get(key)
    if kernel is None:
        entries = {}
        for a in range(degree + 1):
            for b in range(degree + 1):
                entries[(a, b)] = [((a, b), nu ** (a + b) / (factorial(a) * factorial(b)))]
        kernel = _VOROS_KERNELS[key] = BidifferentialKernel(entries)
    return kernel


def voros_star(f: PhaseSpacePolynomial, g: PhaseSpacePolynomial, nu: GaussianRationalFunction | None = None) -> PhaseSpacePolynomial:
    """f exp(ν Σ_k ←∂_{zb_k} →∂_{z_k}) g with ν = 2h by default."""
    nu = HBAR * 2 if nu is None else rf(nu)
    f, g = PhaseSpacePolynomial.lift(f), PhaseSpacePolynomial.lift(g)
    if not f or not g:
        return PhaseSpacePolynomial._wrap({})
    degree = max(max(e[2], e[3]) for e in f.terms)
    # Round up so nearby degrees share one cached kernel.
    return _voros_kernel(nu, max(4, degree)).apply(f, g)


def poisson_bracket(f: PhaseSpacePolynomial, g: PhaseSpacePolynomial, metric: HermitianMetric2 = FLAT_METRIC) -> PhaseSpacePolynomial:
    """g^{k̄ l} (∂_{k̄} f ∂_l g - ∂_{k̄} g ∂_l f): the first-order antisymmetric part fixed by T_1 = h g."""
    out = PhaseSpacePolynomial._wrap({})
    for k in range(2):
        for l in range(2):
            c = metric.upper(k, l)
            if c:
                term = f.derivative(ANTI[k]) * g.derivative(HOLO[l]) - g.derivative(ANTI[k]) * f.derivative(HOLO[l])
                out = out + term.scale(rf(c))
    return out


@dataclass
class AxiomReport:
    passed: bool = True
    failures: list[str] = field(default_factory=list)

    def record(self, name: str, ok: bool, detail: str = "") -> None:
        if not ok:
            self.passed = False
            self.failures.append(f"{name}: {detail}" if detail else name)


def check_axioms(f, g, h, coeffs: StarCoefficients) -> AxiomReport:
    """Associativity, unit law, classical limit and first-order bracket."""
    metric = _flat_metric(coeffs)
    report = AxiomReport()
    fg = star_product(f, g, coeffs)
    gh = star_product(g, h, coeffs)
    left = star_product(fg, h, coeffs)
    right = star_product(f, gh, coeffs)
    report.record("associativity", left == right, f"(f*g)*h = {left}, f*(g*h) = {right}")
    one = PhaseSpacePolynomial.one()
    for name, p in (("f", f), ("g", g), ("h", h)):
        ok = star_product(one, p, coeffs) == p and star_product(p, one, coeffs) == p
        report.record(f"unit law for {name}", ok)
    gf = star_product(g, f, coeffs)
    classical = fg.hbar_coefficient(0)
    report.record("classical limit", classical == f * g, f"{classical} != {f * g}")
    first = (fg - gf).hbar_coefficient(1)
    bracket = poisson_bracket(f, g, metric)
    report.record("first-order bracket", first == bracket, f"{first} != {bracket}")
    return report


def check_separation(a, f, b, coeffs: StarCoefficients) -> AxiomReport:
    """a ∗ f = a f for holomorphic a and f ∗ b = f b for antiholomorphic b."""
    report = AxiomReport()
    if not a.is_holomorphic():
        raise ValueError("left factor must be holomorphic")
    if not b.is_antiholomorphic():
        raise ValueError("right factor must be antiholomorphic")
    af = star_product(a, f, coeffs)
    report.record("holomorphic left factor", af == a * f, f"{af} != {a * f}")
    fb = star_product(f, b, coeffs)
    report.record("antiholomorphic right factor", fb == f * b, f"{fb} != {f * b}")
    return report


def random_polynomial(rng: random.Random, max_degree: int = 3, terms: int = 3, complex_part: bool = True) -> PhaseSpacePolynomial:
    """Small random polynomial with total degree at most ``max_degree``."""
    out = {}
    for _ in range(terms):
        e = [0, 0, 0, 0]
        for _ in range(rng.randint(0, max_degree)):
            e[rng.randrange(4)] += 1
        c = GaussianRational(rng.randint(-3, 3), rng.randint(-3, 3) if complex_part else 0) / rng.randint(1, 3)
        if c:
            out[tuple(e)] = out.get(tuple(e), GaussianRational(0)) + c
    return PhaseSpacePolynomial({e: c for e, c in out.items() if c})


def random_holomorphic(rng: random.Random, max_degree: int = 3, anti: bool = False) -> PhaseSpacePolynomial:
    out = {}
    for _ in range(3):
        a = rng.randint(0, max_degree)
        b = rng.randint(0, max_degree - a)
        e = (0, 0, a, b) if anti else (a, b, 0, 0)
        out[e] = GaussianRational(rng.randint(1, 3), rng.randint(-2, 2)) / rng.randint(1, 2)
    return PhaseSpacePolynomial(out)
