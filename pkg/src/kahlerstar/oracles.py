"""Closed-form reference values for the star-product coefficients.

Nothing in here calls into the recursive engine; every function evaluates a
known formula directly so the two can be compared.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial

from .exactalg import (
    HBAR,
    ONE_RF,
    ZERO_RF,
    FieldMatrix,
    GaussianRational,
    GaussianRationalFunction,
    binom,
    matrix_right_solve,
    rf,
)
from .kahler import CurvatureTensor2, HermitianMetric2

IDENTITY_METRIC = HermitianMetric2([[1, 0], [0, 1]])


@dataclass(frozen=True)
class ShiftMatrix:
    """Down- or right-shift on vectors of length ``size``."""

    size: int
    kind: str

    def __post_init__(self):
        if self.kind not in ("down", "right"):
            raise ValueError(f"shift kind must be 'down' or 'right', not {self.kind!r}")

    def matrix(self, power: int = 1) -> FieldMatrix:
        if self.kind == "down":
            return FieldMatrix.down_shift(self.size, power)
        return FieldMatrix.right_shift(self.size, power)


def unit_corner(size: int) -> FieldMatrix:
    """T_0 embedded in a size x size matrix: a single 1 at the top-left."""
    return FieldMatrix.identity(1).padded(size)


def shift_sandwich(k: int, l: int, size: int) -> FieldMatrix:
    """S_down^k T_0 S_right^l."""
    return ShiftMatrix(size, "down").matrix(k) @ unit_corner(size) @ ShiftMatrix(size, "right").matrix(l)


def weight_diagonal(n: int, size: int) -> FieldMatrix:
    """diag(n, n-2, ..., -n) padded with zeros to ``size``."""
    values = [n - 2 * l for l in range(n + 1)] + [0] * (size - n - 1)
    return FieldMatrix.diagonal(values)


def gamma_ratio_coefficient(n: int) -> GaussianRationalFunction:
    """Γ(1-n+1/h) / (n! Γ(1+1/h)) as the rational function h^n / (n! ∏_{k<n} (1 - k h))."""
    den = rf(factorial(n))
    for k in range(n):
        den = den * (ONE_RF - HBAR * k)
    return HBAR ** n / den


def gamma_ratio_step(prev: GaussianRationalFunction, n: int) -> GaussianRationalFunction:
    """value(n) = value(n-1) h / (n (1 - (n-1) h)), from Γ(x+1) = x Γ(x)."""
    return prev * HBAR / (rf(n) * (ONE_RF - HBAR * (n - 1)))


def c2_closed_form(n: int) -> FieldMatrix:
    """Flat space with g = ½ Id: diag(C(n, i)) h^n / (2^n n!)."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    scale = HBAR ** n / (2 ** n * factorial(n))
    return FieldMatrix.diagonal([scale * binom(n, i) for i in range(n + 1)])


def metric_word_polynomial(n: int, metric: HermitianMetric2) -> dict[tuple[int, int], GaussianRational]:
    """Σ over words (μ, ν) of length n of ∏ g_{μ̄_k ν_k}, grouped by (#2s in ν, #2s in μ).

    Expands (Σ_{μ,ν} g_{μ̄ν} x^[ν=2] y^[μ=2])^n; the coefficient of x^a y^b is
    the word sum with a twos in ν and b twos in μ.
    """
    step = {
        (nu, mu): metric.g[mu][nu] for mu in range(2) for nu in range(2) if metric.g[mu][nu]
    }
    acc = {(0, 0): GaussianRational(1)}
    for _ in range(n):
        nxt: dict[tuple[int, int], GaussianRational] = {}
        for (a, b), c in acc.items():
            for (da, db), w in step.items():
                key = (a + da, b + db)
                nxt[key] = nxt.get(key, GaussianRational(0)) + c * w
        acc = {k: v for k, v in nxt.items() if v}
    return acc


def metric_word_sum_bruteforce(n: int, metric: HermitianMetric2) -> dict[tuple[int, int], GaussianRational]:
    """Same as ``metric_word_polynomial`` by enumerating all 4^n word pairs."""
    out: dict[tuple[int, int], GaussianRational] = {}
    for mus in itertools.product(range(2), repeat=n):
        for nus in itertools.product(range(2), repeat=n):
            prod = GaussianRational(1)
            for mu, nu in zip(mus, nus):
                prod = prod * metric.g[mu][nu]
            key = (sum(nus), sum(mus))
            out[key] = out.get(key, GaussianRational(0)) + prod
    return {k: v for k, v in out.items() if v}


def cp2_closed_form(n: int, metric: HermitianMetric2 = IDENTITY_METRIC) -> FieldMatrix:
    """Projective plane: T_n = c_n Σ_{words} ∏ g · S_down^{#2 in ν} T_0 S_right^{#2 in μ}.

    ``metric`` must be the Fubini-Study metric at the point of interest
    (the identity at the origin).
    """
    if n < 0:
        raise ValueError("order must be nonnegative")
    cn = gamma_ratio_coefficient(n)
    rows = [[ZERO_RF] * (n + 1) for _ in range(n + 1)]
    for (a, b), w in metric_word_polynomial(n, metric).items():
        rows[a][b] = cn * w
    return FieldMatrix._wrap(rows)


def hs_n2_matrices(metric: HermitianMetric2, R: CurvatureTensor2) -> tuple[FieldMatrix, FieldMatrix]:
    """The 3x3 matrices (A_2, X_2) of the direct second-order solution T_2 = h^2 A_2 X_2^{-1}."""
    g = lambda k, l: metric.g[k - 1][l - 1]
    A = [
        [g(1, 1) ** 2, g(1, 1) * g(2, 1), g(2, 1) ** 2],
        [2 * g(1, 1) * g(1, 2), g(1, 2) * g(2, 1) + g(1, 1) * g(2, 2), 2 * g(2, 1) * g(2, 2)],
        [g(1, 2) ** 2, g(1, 2) * g(2, 2), g(2, 2) ** 2],
    ]
    pairs = [(0, 0), (1, 0), (1, 1)]
    diagonal = [2, 1, 2]
    X = []
    for r, (k, l) in enumerate(pairs):
        row = []
        for c, (i, j) in enumerate(pairs):
            entry = HBAR * R[k, l, i, j]
            if r == c:
                entry = entry + diagonal[r]
            row.append(entry)
        X.append(row)
    return FieldMatrix(A), FieldMatrix(X)


def hs_n2_closed_form(metric: HermitianMetric2, R: CurvatureTensor2) -> FieldMatrix:
    A, X = hs_n2_matrices(metric, R)
    return matrix_right_solve(A.scale(HBAR ** 2), X)


def one_dim_product_formula(n: int, g11, scalar_curvature) -> GaussianRationalFunction:
    """g^n ∏_{k=1}^n 4h / (4k + h k (k-1) R) for a curve with scalar curvature R."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    g11 = rf(g11)
    R = rf(scalar_curvature)
    value = g11 ** n
    for k in range(1, n + 1):
        value = value * (HBAR * 4) / (rf(4 * k) + HBAR * R * (k * (k - 1)))
    return value
