"""Kähler geometry at a point of a complex surface, computed from a potential jet.

Index conventions (all indices 0-based in code):

* ``HermitianMetric2.g[k][l]`` is g_{k̄ l} = ∂_l ∂_{k̄} Φ (the barred index
  carries the antiholomorphic derivative), so the matrix is Hermitian.
* ``HermitianMetric2.g_inv[k][l]`` is the tensor g^{k̄ l}, defined by
  Σ_l g^{k̄ l} g_{m̄ l} = δ_km.  As matrices that reads g_inv · gᵀ = Id.
* ``CurvatureTensor2[k, l, i, c]`` is the mixed tensor R^{k̄ l̄}_{ī c̄}:
  both upper indices antiholomorphic, both lower indices antiholomorphic.
* ``lowered_curvature`` holds R_{p ī q c̄} (holomorphic slots 0 and 2).
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import factorial
from typing import Iterator, Mapping, NamedTuple, Sequence

from .exactalg import ONE, ZERO, FieldMatrix, GaussianRational
from .multipoly import SparsePoly

JET_ORDER = 5

JetIndex = tuple[tuple[int, int], tuple[int, int]]


class GeometryError(ValueError):
    pass


def _gr(x) -> GaussianRational:
    return GaussianRational.coerce(x)


def _jet_key(alpha, beta) -> JetIndex:
    return (tuple(alpha), tuple(beta))


@dataclass(frozen=True)
class PotentialJet:
    """Mixed partial derivatives ∂^α ∂̄^β Φ at the base point, |α|+|β| ≤ 5.

    Missing entries are zero.  The potential is real, so the value at (α, β)
    must be the conjugate of the value at (β, α).
    """

    values: Mapping[JetIndex, GaussianRational] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, val in self.values.items():
            (a1, a2), (b1, b2) = key
            if min(a1, a2, b1, b2) < 0 or a1 + a2 + b1 + b2 > JET_ORDER:
                raise GeometryError(f"jet index {key} outside order {JET_ORDER}")
            val = _gr(val)
            if val:
                clean[_jet_key(*key)] = val
        for (alpha, beta), val in clean.items():
            if clean.get((beta, alpha), ZERO) != val.conjugate():
                raise GeometryError(f"jet is not real: entry {alpha}|{beta} has no conjugate partner")
        object.__setattr__(self, "values", clean)

    def __call__(self, alpha, beta) -> GaussianRational:
        return self.values.get(_jet_key(alpha, beta), ZERO)

    def d(self, holo: Sequence[int] = (), anti: Sequence[int] = ()) -> GaussianRational:
        """Derivative by listed holomorphic and antiholomorphic directions."""
        alpha = [0, 0]
        beta = [0, 0]
        for k in holo:
            alpha[k] += 1
        for k in anti:
            beta[k] += 1
        return self(alpha, beta)

    def taylor_polynomial(self) -> SparsePoly:
        terms = {}
        for ((a1, a2), (b1, b2)), val in self.values.items():
            denom = factorial(a1) * factorial(a2) * factorial(b1) * factorial(b2)
            terms[(a1, a2, b1, b2)] = val / denom
        return SparsePoly(terms)

    @classmethod
    def from_taylor(cls, poly: SparsePoly) -> "PotentialJet":
        values = {}
        for (a1, a2, b1, b2), c in poly.terms.items():
            total = a1 + a2 + b1 + b2
            if total == 0 or total > JET_ORDER:
                continue
            mult = factorial(a1) * factorial(a2) * factorial(b1) * factorial(b2)
            values[((a1, a2), (b1, b2))] = c * mult
        return cls(values)

    def __add__(self, other: "PotentialJet") -> "PotentialJet":
        keys = set(self.values) | set(other.values)
        return PotentialJet({k: self.values.get(k, ZERO) + other.values.get(k, ZERO) for k in keys})

    def scaled(self, factor) -> "PotentialJet":
        factor = _gr(factor)
        if not factor.is_real():
            raise GeometryError("a potential can only be scaled by a real number")
        return PotentialJet({k: v * factor for k, v in self.values.items()})

    def linear_change(self, A: Sequence[Sequence]) -> "PotentialJet":
        """Jet of Φ(A w) in the new coordinates w, for an invertible 2x2 A."""
        A = [[_gr(x) for x in row] for row in A]
        if not (A[0][0] * A[1][1] - A[0][1] * A[1][0]):
            raise GeometryError("coordinate change is singular")
        one = ONE
        w = [SparsePoly.variable(v, one) for v in ("z1", "z2", "zb1", "zb2")]
        images = [
            w[0] * A[0][0] + w[1] * A[0][1],
            w[0] * A[1][0] + w[1] * A[1][1],
            w[2] * A[0][0].conjugate() + w[3] * A[0][1].conjugate(),
            w[2] * A[1][0].conjugate() + w[3] * A[1][1].conjugate(),
        ]
        return PotentialJet.from_taylor(self.taylor_polynomial().substitute_linear(images, JET_ORDER))


def _check_real_polynomial(P: SparsePoly) -> None:
    if P != P.conjugate():
        raise GeometryError("potential polynomial is not real-valued")


def polynomial_potential_jet(P: SparsePoly) -> PotentialJet:
    """Jet of a polynomial potential at the origin."""
    _check_real_polynomial(P)
    return PotentialJet.from_taylor(P.truncate(JET_ORDER))


def log_potential_jet(P: SparsePoly, point=(0, 0), weight=1) -> PotentialJet:
    """Jet of weight * log P at ``point`` for a real polynomial P with P(point) > 0."""
    _check_real_polynomial(P)
    weight = _gr(weight)
    p1, p2 = (_gr(x) for x in point)
    one = ONE
    shift = [
        SparsePoly.variable("z1", one) + SparsePoly.constant(p1),
        SparsePoly.variable("z2", one) + SparsePoly.constant(p2),
        SparsePoly.variable("zb1", one) + SparsePoly.constant(p1.conjugate()),
        SparsePoly.variable("zb2", one) + SparsePoly.constant(p2.conjugate()),
    ]
    shifted = P.substitute_linear(shift)
    c = shifted.coefficient((0, 0, 0, 0), ZERO)
    if not c.is_real() or c.re <= 0:
        raise GeometryError("log potential needs P > 0 at the base point")
    u = (shifted - SparsePoly.constant(c)).scale(c.inverse()).truncate(JET_ORDER)
    # log(1 + u) = sum (-1)^(k+1) u^k / k; u has no constant term.
    series = SparsePoly({})
    power = SparsePoly.constant(one)
    for k in range(1, JET_ORDER + 1):
        power = power.mul_truncated(u, JET_ORDER)
        if not power:
            break
        series = series + power.scale(_gr((-1) ** (k + 1)) / k)
    return PotentialJet.from_taylor(series.scale(weight))


def _var(name):
    return SparsePoly.variable(name, ONE)


def _norm_sq() -> SparsePoly:
    return _var("z1") * _var("zb1") + _var("z2") * _var("zb2")


def flat_potential() -> SparsePoly:
    """½(|z1|² + |z2|²): the flat metric g = ½ Id."""
    return _norm_sq().scale(GaussianRational(1, 0) / 2)


def projective_potential_polynomial() -> SparsePoly:
    """1 + |z|², whose log is the Fubini-Study potential."""
    return SparsePoly.constant(ONE) + _norm_sq()


def hyperbolic_potential_polynomial() -> SparsePoly:
    """1 - |z|²; minus its log is the ball potential."""
    return SparsePoly.constant(ONE) - _norm_sq()


def quadric_potential_polynomial() -> SparsePoly:
    """1 + |z|² + ¼ (Σ zb_k²)(Σ z_l²)."""
    holo = _var("z1") * _var("z1") + _var("z2") * _var("z2")
    anti = _var("zb1") * _var("zb1") + _var("zb2") * _var("zb2")
    return projective_potential_polynomial() + (holo * anti).scale(GaussianRational(1, 0) / 4)


class HermitianMetric2:
    """A Hermitian 2x2 metric g[k][l] = g_{k̄ l} with its inverse tensor g_inv[k][l] = g^{k̄ l}."""

    __slots__ = ("g", "g_inv")

    def __init__(self, entries: Sequence[Sequence]):
        g = tuple(tuple(_gr(x) for x in row) for row in entries)
        if len(g) != 2 or any(len(r) != 2 for r in g):
            raise GeometryError("metric must be 2x2")
        for k in range(2):
            for l in range(2):
                if g[k][l] != g[l][k].conjugate():
                    raise GeometryError(f"metric is not Hermitian at ({k + 1},{l + 1})")
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        if not det:
            raise GeometryError("metric is singular")
        inv_det = det.inverse()
        self.g = g
        # Inverse of the transposed matrix: contraction runs over the holomorphic index.
        self.g_inv = (
            (g[1][1] * inv_det, -g[1][0] * inv_det),
            (-g[0][1] * inv_det, g[0][0] * inv_det),
        )

    def __getitem__(self, key) -> GaussianRational:
        k, l = key
        return self.g[k][l]

    def upper(self, k: int, l: int) -> GaussianRational:
        """g^{k̄ l}."""
        return self.g_inv[k][l]

    def is_positive(self) -> bool:
        det = self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
        return self.g[0][0].re > 0 and det.re > 0

    def matrix(self) -> FieldMatrix:
        return FieldMatrix(self.g)

    def __eq__(self, other):
        return isinstance(other, HermitianMetric2) and self.g == other.g

    def __hash__(self):
        return hash(self.g)

    def __repr__(self):
        return f"HermitianMetric2({[[str(x) for x in r] for r in self.g]})"


CurvIndex = tuple[int, int, int, int]
ALL_INDICES: tuple[CurvIndex, ...] = tuple(itertools.product(range(2), repeat=4))


class CurvatureTensor2:
    """Components R^{k̄ l̄}_{ī c̄}, indexed ``R[k, l, i, c]`` from 0."""

    __slots__ = ("components", "lower")

    def __init__(self, components: Mapping[CurvIndex, object] | None = None, lower=None):
        components = components or {}
        comp = {}
        for key in ALL_INDICES:
            comp[key] = _gr(components.get(key, 0))
        extra = set(components) - set(ALL_INDICES)
        if extra:
            raise GeometryError(f"bad curvature index {sorted(extra)[0]}")
        self.components = comp
        self.lower = lower

    @classmethod
    def zero(cls) -> "CurvatureTensor2":
        return cls({})

    @classmethod
    def symmetric(cls, values: Mapping[tuple[int, int], Mapping[tuple[int, int], object]]) -> "CurvatureTensor2":
        """Build from representatives with k ≤ l and i ≤ c, filling by symmetry."""
        comp = {}
        for k, l, i, c in ALL_INDICES:
            comp[(k, l, i, c)] = values[tuple(sorted((k, l)))][tuple(sorted((i, c)))]
        return cls(comp)

    def __getitem__(self, key: CurvIndex) -> GaussianRational:
        return self.components[key]

    def items(self) -> Iterator[tuple[CurvIndex, GaussianRational]]:
        return iter(self.components.items())

    def is_zero(self) -> bool:
        return not any(self.components.values())

    def __eq__(self, other):
        return isinstance(other, CurvatureTensor2) and self.components == other.components

    def __hash__(self):
        return hash(tuple(self.components[k] for k in ALL_INDICES))

    def __repr__(self):
        nz = {k: str(v) for k, v in self.components.items() if v}
        return f"CurvatureTensor2({nz})"


@dataclass(frozen=True)
class SymmetryReport:
    ok: bool
    violations: tuple[str, ...] = ()


def check_curvature_symmetries(R: CurvatureTensor2) -> SymmetryReport:
    """Symmetry in the upper pair and in the lower pair."""
    bad = []
    for k, l, i, c in ALL_INDICES:
        if R[k, l, i, c] != R[l, k, i, c]:
            bad.append(f"upper pair: R[{k + 1}{l + 1}|{i + 1}{c + 1}] != R[{l + 1}{k + 1}|{i + 1}{c + 1}]")
        if R[k, l, i, c] != R[k, l, c, i]:
            bad.append(f"lower pair: R[{k + 1}{l + 1}|{i + 1}{c + 1}] != R[{k + 1}{l + 1}|{c + 1}{i + 1}]")
    return SymmetryReport(not bad, tuple(dict.fromkeys(bad)))


def metric_from_jet(jet: PotentialJet) -> HermitianMetric2:
    return HermitianMetric2([[jet.d((l,), (k,)) for l in range(2)] for k in range(2)])


@dataclass(frozen=True)
class ChristoffelSymbols2:
    """Γ^l_{ik} keyed (l, i, k); the antiholomorphic family is the conjugate."""

    holo: Mapping[tuple[int, int, int], GaussianRational]

    def __getitem__(self, key) -> GaussianRational:
        return self.holo[key]

    def anti(self, l: int, i: int, k: int) -> GaussianRational:
        """Γ^{l̄}_{ī k̄}."""
        return self.holo[(l, i, k)].conjugate()

    def is_zero(self) -> bool:
        return not any(self.holo.values())


def christoffel_from_jet(jet: PotentialJet, metric: HermitianMetric2 | None = None) -> ChristoffelSymbols2:
    """Γ^l_{ik} = g^{q̄ l} ∂_i ∂_k ∂_q̄ Φ."""
    metric = metric or metric_from_jet(jet)
    out = {}
    for l, i, k in itertools.product(range(2), repeat=3):
        out[(l, i, k)] = sum(
            (metric.g_inv[q][l] * jet.d((i, k), (q,)) for q in range(2)), ZERO
        )
    return ChristoffelSymbols2(out)


def lowered_curvature(metric: HermitianMetric2, jet: PotentialJet) -> dict[CurvIndex, GaussianRational]:
    """R_{i j̄ k l̄} = -Φ_{i j̄ k l̄} + g^{p q̄} Φ_{i q̄ k} Φ_{p j̄ l̄}, keyed (i, j, k, l)."""
    out = {}
    for i, j, k, l in ALL_INDICES:
        val = -jet.d((i, k), (j, l))
        for p in range(2):
            for q in range(2):
                val = val + metric.g_inv[q][p] * jet.d((i, k), (q,)) * jet.d((p,), (j, l))
        out[(i, j, k, l)] = val
    return out


def raise_curvature(metric: HermitianMetric2, lowered: Mapping[CurvIndex, GaussianRational]) -> CurvatureTensor2:
    """R^{k̄ l̄}_{ī c̄} = g^{k̄ p} g^{l̄ q} R_{ī p q c̄}, with R_{ī p q c̄} = -R_{p ī q c̄}."""
    comp = {}
    for k, l, i, c in ALL_INDICES:
        val = ZERO
        for p in range(2):
            for q in range(2):
                val = val - metric.upper(k, p) * metric.upper(l, q) * lowered[(p, i, q, c)]
        comp[(k, l, i, c)] = val
    return CurvatureTensor2(comp)


def lower_curvature(metric: HermitianMetric2, R: CurvatureTensor2) -> dict[CurvIndex, GaussianRational]:
    """Inverse of ``raise_curvature``: recover R_{p ī q c̄}."""
    out = {}
    for p, i, q, c in ALL_INDICES:
        val = ZERO
        for k in range(2):
            for l in range(2):
                val = val - metric.g[k][p] * metric.g[l][q] * R[k, l, i, c]
        out[(p, i, q, c)] = val
    return out


class CurvatureConsistencyError(ArithmeticError):
    pass


def curvature_from_jet(jet: PotentialJet, metric: HermitianMetric2 | None = None) -> CurvatureTensor2:
    """Raised curvature at the base point, keeping the lowered components."""
    metric = metric or metric_from_jet(jet)
    lowered = lowered_curvature(metric, jet)
    R = raise_curvature(metric, lowered)
    R.lower = lowered
    report = check_curvature_symmetries(R)
    if not report.ok:
        raise CurvatureConsistencyError("raised curvature lost its symmetries: " + report.violations[0])
    return R


@dataclass(frozen=True)
class LocalSymmetryReport:
    ok: bool
    nonzero: tuple[str, ...] = ()


def _coefficient_at(poly: SparsePoly, var: int) -> GaussianRational:
    e = [0, 0, 0, 0]
    e[var] = 1
    return poly.coefficient(tuple(e), ZERO)


def check_locally_symmetric(jet: PotentialJet, metric: HermitianMetric2 | None = None) -> LocalSymmetryReport:
    """Test ∇R = 0 at the base point.

    First derivatives of R_{i j̄ k l̄} come from the order-5 jet: every
    ingredient of the lowered-curvature formula is expanded to first order in
    the displacement, then the Christoffel corrections are subtracted.
    """
    metric = metric or metric_from_jet(jet)
    phi = jet.taylor_polynomial()
    holo_vars, anti_vars = (0, 1), (2, 3)

    def deriv(holo=(), anti=()) -> SparsePoly:
        p = phi
        for k in holo:
            p = p.derivative(holo_vars[k])
        for k in anti:
            p = p.derivative(anti_vars[k])
        return p.truncate(1)

    # g^{p q̄}(w) to first order: N0 - N0 δ N0 with δ[s][t] = first-order part of Φ_{t s̄}.
    n0 = [[metric.g_inv[q][p] for q in range(2)] for p in range(2)]
    delta = [[deriv((t,), (s,)) - SparsePoly.constant(jet.d((t,), (s,))) for t in range(2)] for s in range(2)]
    inv_poly = [[None, None], [None, None]]
    for p in range(2):
        for q in range(2):
            acc = SparsePoly.constant(n0[p][q])
            for s in range(2):
                for t in range(2):
                    acc = acc - delta[s][t].scale(n0[p][s] * n0[t][q])
            inv_poly[p][q] = acc

    r0 = lowered_curvature(metric, jet)
    gamma = christoffel_from_jet(jet, metric)
    bad = []
    for i, j, k, l in ALL_INDICES:
        rpoly = -deriv((i, k), (j, l))
        for p in range(2):
            for q in range(2):
                rpoly = rpoly + (inv_poly[p][q] * deriv((i, k), (q,)) * deriv((p,), (j, l))).truncate(1)
        for e in range(2):
            holo_d = _coefficient_at(rpoly, holo_vars[e])
            anti_d = _coefficient_at(rpoly, anti_vars[e])
            for p in range(2):
                holo_d = holo_d - gamma[(p, e, i)] * r0[(p, j, k, l)] - gamma[(p, e, k)] * r0[(i, j, p, l)]
                anti_d = (
                    anti_d
                    - gamma[(p, e, j)].conjugate() * r0[(i, p, k, l)]
                    - gamma[(p, e, l)].conjugate() * r0[(i, j, k, p)]
                )
            if holo_d:
                bad.append(f"nabla_{e + 1} R_({i + 1},{j + 1}b,{k + 1},{l + 1}b) = {holo_d}")
            if anti_d:
                bad.append(f"nabla_{e + 1}b R_({i + 1},{j + 1}b,{k + 1},{l + 1}b) = {anti_d}")
    return LocalSymmetryReport(not bad, tuple(bad))


class Geometry(NamedTuple):
    """Pointwise data the star-product engine needs."""

    jet: PotentialJet | None
    metric: HermitianMetric2
    curvature: CurvatureTensor2
    name: str = ""


def geometry_from_jet(jet: PotentialJet, name: str = "") -> Geometry:
    metric = metric_from_jet(jet)
    return Geometry(jet, metric, curvature_from_jet(jet, metric), name)


BUILTIN_NAMES = ("c2", "cp2", "q2")


def builtin_jet(name: str, point=(0, 0)) -> PotentialJet:
    key = name.lower()
    if key == "c2":
        # Flat space is homogeneous: the jet is the same at every point.
        return polynomial_potential_jet(flat_potential())
    if key == "cp2":
        return log_potential_jet(projective_potential_polynomial(), point)
    if key == "q2":
        return log_potential_jet(quadric_potential_polynomial(), point)
    raise GeometryError(f"unknown manifold {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")


def builtin_manifold(name: str, point=(0, 0)) -> Geometry:
    """Jet, metric and curvature of C², CP² or Q² at a base point (origin by default)."""
    return geometry_from_jet(builtin_jet(name, point), name.lower())


def random_gaussian_rational(rng: random.Random, size: int = 3, complex_part: bool = True) -> GaussianRational:
    den = rng.randint(1, size)
    re = rng.randint(-size, size)
    im = rng.randint(-size, size) if complex_part else 0
    return GaussianRational(re, im) / den


def random_hermitian_metric(rng: random.Random, size: int = 3, complex_part: bool = True) -> HermitianMetric2:
    """Random invertible Hermitian metric with small entries."""
    while True:
        a = GaussianRational(rng.randint(1, size), 0) / rng.randint(1, size)
        d = GaussianRational(rng.randint(1, size), 0) / rng.randint(1, size)
        b = random_gaussian_rational(rng, size, complex_part)
        if a * d - b * b.conjugate():
            return HermitianMetric2([[a, b], [b.conjugate(), d]])


def random_symmetric_curvature(rng: random.Random, size: int = 3, complex_part: bool = True) -> CurvatureTensor2:
    """Random tensor with only the pair symmetries (not geometric in general)."""
    pairs = [(0, 0), (0, 1), (1, 1)]
    values = {u: {v: random_gaussian_rational(rng, size, complex_part) for v in pairs} for u in pairs}
    return CurvatureTensor2.symmetric(values)


def random_invertible_matrix(rng: random.Random, size: int = 2, complex_part: bool = True):
    while True:
        A = [[random_gaussian_rational(rng, size, complex_part) for _ in range(2)] for _ in range(2)]
        if A[0][0] * A[1][1] - A[0][1] * A[1][0]:
            return A


def random_locally_symmetric_geometry(rng: random.Random, complex_part: bool = True) -> Geometry:
    """A locally symmetric surface seen in a random linear frame.

    Draws from flat space, the projective plane, the ball, the quadric and
    products of curves, optionally at a random base point and with a rescaled
    potential; all of these satisfy ∇R = 0, which the star-product
    recurrences require for consistency.
    """
    kind = rng.choice(["c2", "cp2", "ch2", "q2", "cp1xcp1", "cp1xch1", "cp1xc1"])
    small = lambda: GaussianRational(rng.randint(-1, 1), rng.randint(-1, 1) if complex_part else 0) / rng.randint(2, 3)
    point = (small(), small())
    z1, z2, zb1, zb2 = (_var(v) for v in ("z1", "z2", "zb1", "zb2"))
    one = SparsePoly.constant(ONE)
    if kind == "c2":
        jet = polynomial_potential_jet(flat_potential())
    elif kind == "cp2":
        jet = log_potential_jet(projective_potential_polynomial(), point)
    elif kind == "ch2":
        # Keep the base point well inside the unit ball.
        jet = log_potential_jet(hyperbolic_potential_polynomial(), (point[0] / 2, point[1] / 2), -1)
    elif kind == "q2":
        jet = log_potential_jet(quadric_potential_polynomial(), point)
    elif kind == "cp1xcp1":
        jet = log_potential_jet(one + z1 * zb1, point) + log_potential_jet(one + z2 * zb2, point)
    elif kind == "cp1xch1":
        jet = log_potential_jet(one + z1 * zb1, point) + log_potential_jet(one - z2 * zb2, (0, point[1] / 2), -1)
    else:
        jet = log_potential_jet(one + z1 * zb1, point) + polynomial_potential_jet(z2 * zb2)
    scale = GaussianRational(rng.randint(1, 3), 0) / rng.randint(1, 3)
    jet = jet.scaled(scale).linear_change(random_invertible_matrix(rng, 2, complex_part))
    return geometry_from_jet(jet, f"{kind}-frame")
