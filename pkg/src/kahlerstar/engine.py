"""Order-by-order construction of the star-product coefficient matrices.

``T_n`` is an (n+1)x(n+1) matrix over Q(i)(h).  Its entry (a, b), counted
from 0, pairs the derivative D^{α} with α = (n-a, a) on the left factor and
D^{β̄} with β = (n-b, b) on the right factor.  Each order is obtained from
the previous one by an exact right solve ``T_n X_n = h A'_n``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .exactalg import (
    HBAR,
    ONE_RF,
    ZERO_RF,
    FieldMatrix,
    GaussianRational,
    GaussianRationalFunction,
    HbarPolynomial,
    binom,
    matrix_right_solve,
    poly_gcd,
    rf,
    rf_sum,
)
from .kahler import CurvatureTensor2, Geometry, HermitianMetric2


def _pair(n: int) -> int:
    return binom(n, 2)


def _x_bands(n: int, R: CurvatureTensor2) -> dict[tuple[int, int], tuple[int, GaussianRational]]:
    """Nonzero entries of X_n as (constant, coefficient of h), keyed 0-based (row, col)."""
    size = n + 1
    out = {}
    for j in range(1, size + 1):
        col = j - 1
        bands = {
            j - 2: (0, _pair(n - j + 3) * R[0, 0, 1, 1]),
            j - 1: (0, 2 * _pair(n - j + 2) * R[0, 0, 1, 0] + (n - j + 2) * (j - 2) * R[1, 0, 1, 1]),
            j: (
                n,
                _pair(n - j + 1) * R[0, 0, 0, 0]
                + _pair(j - 1) * R[1, 1, 1, 1]
                + 2 * (n - j + 1) * (j - 1) * R[1, 0, 1, 0],
            ),
            j + 1: (0, 2 * _pair(j) * R[1, 1, 1, 0] + j * (n - j) * R[1, 0, 0, 0]),
            j + 2: (0, _pair(j + 1) * R[1, 1, 0, 0]),
        }
        for row, val in bands.items():
            if 1 <= row <= size and (val[0] or val[1]):
                out[(row - 1, col)] = val
    return out


def _y_bands(n: int, R: CurvatureTensor2) -> dict[tuple[int, int], tuple[int, GaussianRational]]:
    size = n + 1
    out = {}
    for j in range(1, size + 1):
        col = j - 1
        bands = {
            j - 2: (0, -_pair(n - j + 3) * R[0, 0, 1, 1]),
            j - 1: (0, -(n - j + 2) * (j - 2) * R[1, 0, 1, 1]),
            j: (n - 2 * j + 2, _pair(n - j + 1) * R[0, 0, 0, 0] - _pair(j - 1) * R[1, 1, 1, 1]),
            j + 1: (0, j * (n - j) * R[1, 0, 0, 0]),
            j + 2: (0, _pair(j + 1) * R[1, 1, 0, 0]),
        }
        for row, val in bands.items():
            if 1 <= row <= size and (val[0] or val[1]):
                out[(row - 1, col)] = val
    return out


def _from_bands(size: int, bands) -> FieldMatrix:
    rows = [[ZERO_RF] * size for _ in range(size)]
    for (r, c), (const, hcoef) in bands.items():
        rows[r][c] = GaussianRationalFunction.coerce(HbarPolynomial((const, hcoef)))
    return FieldMatrix._wrap(rows)


def build_X(n: int, R: CurvatureTensor2) -> FieldMatrix:
    """The pentadiagonal (n+1)x(n+1) matrix X_n = n Id + h H_n."""
    if n < 1:
        raise ValueError("X_n is defined for n >= 1")
    return _from_bands(n + 1, _x_bands(n, R))


def build_H(n: int, R: CurvatureTensor2) -> FieldMatrix:
    """The h-free part H_n with X_n = n Id + h H_n."""
    bands = {k: (0, v[1]) for k, v in _x_bands(n, R).items()}
    rows = [[ZERO_RF] * (n + 1) for _ in range(n + 1)]
    for (r, c), (_, coef) in bands.items():
        rows[r][c] = rf(coef)
    return FieldMatrix._wrap(rows)


def build_Y(n: int, R: CurvatureTensor2) -> FieldMatrix:
    """The companion matrix Y_n of the antiholomorphic-sided system."""
    if n < 1:
        raise ValueError("Y_n is defined for n >= 1")
    return _from_bands(n + 1, _y_bands(n, R))


def _assemble(n: int, metric: HermitianMetric2, prev: FieldMatrix, signed: bool) -> FieldMatrix:
    if prev.shape != (n, n):
        raise ValueError(f"T_{n - 1} must be {n}x{n}, got {prev.shape}")
    size = n + 1
    rows = [[ZERO_RF] * size for _ in range(size)]
    for i in range(size):
        for j in range(size):
            terms = []
            for k in range(2):
                for l in range(2):
                    a, b = i - l, j - k
                    if 0 <= a < n and 0 <= b < n and prev.rows[a][b]:
                        coef = metric.g[k][l]
                        if signed and k == 1:
                            coef = -coef
                        if coef:
                            terms.append(prev.rows[a][b] * coef)
            rows[i][j] = rf_sum(terms)
    return FieldMatrix._wrap(rows)


def assemble_A_prime(n: int, metric: HermitianMetric2, prev: FieldMatrix) -> FieldMatrix:
    """A'_n[i][j] = Σ_{k,l} g_{k̄ l} T_{n-1}[i - δ_{l,2}][j - δ_{k,2}] (zero out of range)."""
    return _assemble(n, metric, prev, signed=False)


def assemble_C_prime(n: int, metric: HermitianMetric2, prev: FieldMatrix) -> FieldMatrix:
    """Like A'_n but with the k = 2 terms negated."""
    return _assemble(n, metric, prev, signed=True)


def advance(prev: FieldMatrix, geometry: Geometry, n: int | None = None) -> FieldMatrix:
    """T_n from T_{n-1} by solving T_n X_n = h A'_n."""
    n = prev.shape[0] if n is None else n
    A = assemble_A_prime(n, geometry.metric, prev)
    return matrix_right_solve(A.scale(HBAR), build_X(n, geometry.curvature))


@dataclass
class StarCoefficients:
    """T_0 .. T_N for one geometry."""

    geometry: Geometry
    tables: list[FieldMatrix] = field(default_factory=list)
    # Derived data keyed by consumers (e.g. bidifferential kernels); never compared.
    memo: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def max_order(self) -> int:
        return len(self.tables) - 1

    def __getitem__(self, n: int) -> FieldMatrix:
        return self.tables[n]

    def extend_to(self, order: int) -> "StarCoefficients":
        if self.max_order >= order:
            return self
        state = self.memo.get("chain")
        if state is None or state[0] is not self.tables[-1]:
            state = _chain_state(self.tables[-1])
        _, P, factors = state
        while self.max_order < order:
            P, factors, T = _fraction_free_step(P, factors, self.geometry, self.max_order + 1)
            self.tables.append(T)
        self.memo["chain"] = (self.tables[-1], P, factors)
        return self


def _chain_state(T: FieldMatrix) -> tuple:
    """Write T as P / D with polynomial P and a single denominator factor D."""
    D = HbarPolynomial((1,))
    for row in T.rows:
        for x in row:
            D = D * x.den.exact_div(poly_gcd(D, x.den))
    P = FieldMatrix([[rf(x.num * D.exact_div(x.den)) for x in row] for row in T.rows])
    return T, P, [D]


def _cancel(num: HbarPolynomial, factors: list[HbarPolynomial]) -> tuple:
    """Cancel num / prod(factors) one factor at a time; returns the new numerator and factors."""
    parts = []
    for f in factors:
        g = poly_gcd(num, f)
        if g.degree > 0:
            num = num.exact_div(g)
            f = f.exact_div(g)
        parts.append(f)
    return num, parts


def _poly_lcm(a: HbarPolynomial, b: HbarPolynomial) -> HbarPolynomial:
    return a * b.exact_div(poly_gcd(a, b)).make_monic()


def _fraction_free_step(P: FieldMatrix, factors: list, geometry: Geometry, n: int) -> tuple:
    """Solve T_n X_n = h A'_n with T_{n-1} = P / prod(factors), via the adjugate of X_n.

    Returns a numerator matrix and factor list for T_n, and T_n itself in lowest terms.
    """
    X = build_X(n, geometry.curvature)
    det = determinant(X)
    adj = X.inverse().scale(det)
    Q = (assemble_A_prime(n, geometry.metric, P) @ adj).scale(HBAR)
    factors = factors + [det.num]
    one = HbarPolynomial((1,))
    cancelled = [[_cancel(x.num, factors) if x else None for x in row] for row in Q.rows]
    # Common multiple of all reduced denominators, kept factor by factor.
    common = [one] * len(factors)
    for row in cancelled:
        for entry in row:
            if entry is not None:
                common = [_poly_lcm(c, p) for c, p in zip(common, entry[1])]
    table, numerators = [], []
    for row in cancelled:
        table.append([])
        numerators.append([])
        for entry in row:
            if entry is None:
                table[-1].append(ZERO_RF)
                numerators[-1].append(ZERO_RF)
                continue
            num, parts = entry
            den, scaled = one, num
            for c, p in zip(common, parts):
                den = den * p
                scaled = scaled * c.exact_div(p)
            table[-1].append(GaussianRationalFunction._make(num, den, one))
            numerators[-1].append(rf(scaled))
    kept = [c for c in common if c.degree > 0]
    unit = one
    for c in common:
        if c.degree <= 0:
            unit = unit * c
    if unit != one:
        kept.append(unit)
    return FieldMatrix(numerators), kept, FieldMatrix(table)


def compute_sequence(geometry: Geometry, order: int) -> StarCoefficients:
    if order < 0:
        raise ValueError("order must be nonnegative")
    coeffs = StarCoefficients(geometry, [FieldMatrix.identity(1)])
    return coeffs.extend_to(order)


# Factorized path ----------------------------------------------------------

Theta = Sequence[tuple[Sequence, Sequence]]


def default_theta(metric: HermitianMetric2) -> list[tuple[tuple, tuple]]:
    """Rank-one split g_{μ̄ ν} = Σ_p θ̄^p_μ θ^p_ν with p running over index pairs (k, l).

    Each entry is (antiholomorphic weights (μ = 1, 2), holomorphic weights (ν = 1, 2)).
    """
    out = []
    for k, l in itertools.product(range(2), repeat=2):
        anti = tuple(metric.g[k][l] if mu == k else GaussianRational(0) for mu in range(2))
        holo = tuple(GaussianRational(1 if nu == l else 0) for nu in range(2))
        out.append((anti, holo))
    return out


def check_theta(metric: HermitianMetric2, theta: Theta) -> None:
    for mu in range(2):
        for nu in range(2):
            total = sum((GaussianRational.coerce(a[mu]) * GaussianRational.coerce(b[nu]) for a, b in theta), GaussianRational(0))
            if total != metric.g[mu][nu]:
                raise ValueError(
                    f"theta does not reproduce the metric at ({mu + 1},{nu + 1}): {total} != {metric.g[mu][nu]}"
                )


def compute_via_factorization(
    geometry: Geometry, order: int, theta: Theta | None = None, expand_words: bool = False
) -> list[FieldMatrix]:
    """T_0..T_N through the shift-operator product formula on (N+1)x(N+1) truncations.

    T_n = h^n Σ_{p_1..p_n} F^{p_n}..F^{p_1} T_0 (B^{p_1} X_1^{-1})..(B^{p_n} X_n^{-1})
    with F^p = θ^p_1 + θ^p_2 S_down and B^p = θ̄^p_1 + θ̄^p_2 S_right.  The
    default evaluates the word sum by nesting it one factor at a time; with
    ``expand_words`` every word is multiplied out separately (4^n terms).
    """
    metric = geometry.metric
    theta = default_theta(metric) if theta is None else theta
    check_theta(metric, theta)
    size = order + 1
    identity = FieldMatrix.identity(size)
    down = FieldMatrix.down_shift(size)
    right = FieldMatrix.right_shift(size)
    lefts, rights = [], []
    for anti, holo in theta:
        lefts.append(identity.scale(rf(holo[0])) + down.scale(rf(holo[1])))
        rights.append(identity.scale(rf(anti[0])) + right.scale(rf(anti[1])))
    inverses = [None] + [build_X(k, geometry.curvature).inverse().padded(size) for k in range(1, size)]
    T0 = FieldMatrix.identity(1).padded(size)
    results = [FieldMatrix.identity(1)]
    if expand_words:
        for n in range(1, size):
            acc = FieldMatrix.zeros(size)
            for word in itertools.product(range(len(theta)), repeat=n):
                left = T0
                rmat = FieldMatrix.identity(size)
                for k, p in enumerate(word, start=1):
                    left = lefts[p] @ left
                    rmat = rmat @ rights[p] @ inverses[k]
                acc = acc + left @ rmat
            results.append(_extract(acc.scale(HBAR ** n), n))
        return results
    acc = T0
    for n in range(1, size):
        acc = _sum_matrices([lefts[p] @ acc @ rights[p] for p in range(len(theta))]) @ inverses[n]
        results.append(_extract(acc.scale(HBAR ** n), n))
    return results


def _sum_matrices(mats: list[FieldMatrix]) -> FieldMatrix:
    size = mats[0].shape
    return FieldMatrix._wrap(
        [[rf_sum([m.rows[i][j] for m in mats if m.rows[i][j]]) for j in range(size[1])] for i in range(size[0])]
    )


def _extract(full: FieldMatrix, n: int) -> FieldMatrix:
    block = full.block(n + 1, n + 1)
    size = full.shape[0]
    for i in range(size):
        for j in range(size):
            if (i > n or j > n) and full.rows[i][j]:
                raise ArithmeticError(f"order {n} term leaks outside its block at ({i + 1},{j + 1})")
    return block


# Checks -------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    """Outcome of an exact identity check at one order."""

    name: str
    order: int
    passed: bool
    mismatch: tuple | None = None

    def describe(self) -> str:
        if self.passed:
            return f"{self.name} n={self.order}: ok"
        where, lhs, rhs = self.mismatch
        return f"{self.name} n={self.order}: mismatch at {where}: {lhs} != {rhs}"


def compare_matrices(name: str, n: int, lhs: FieldMatrix, rhs: FieldMatrix) -> CheckResult:
    diff = lhs.first_difference(rhs)
    if diff is None:
        return CheckResult(name, n, True)
    i, j, a, b = diff
    return CheckResult(name, n, False, ((i + 1, j + 1), str(a), str(b)))


def verify_dual_identity(coeffs: StarCoefficients, n: int) -> list[CheckResult]:
    """T_n Y_n = h C'_n and Y_n^† T_n = h C'_n^†."""
    T = coeffs[n]
    Y = build_Y(n, coeffs.geometry.curvature)
    C = assemble_C_prime(n, coeffs.geometry.metric, coeffs[n - 1]).scale(HBAR)
    return [
        compare_matrices("T Y = h C'", n, T @ Y, C),
        compare_matrices("Y^dagger T = h C'^dagger", n, Y.dagger() @ T, C.dagger()),
    ]


def verify_hermiticity(coeffs: StarCoefficients, n: int) -> CheckResult:
    T = coeffs[n]
    return compare_matrices("T = T^dagger", n, T, T.dagger())


def raw_recurrence_residuals(coeffs: StarCoefficients, n: int, direction: int) -> dict[tuple[int, int], tuple]:
    """Entrywise form of the defining recurrence for one antiholomorphic direction.

    For each multi-index pair (α, β) of weight n, compares
        Σ_d h g_{ī d} T_{n-1}[α - e_d, β - e_i]
    with
        β_i T_n[α, β]
        + Σ_{k,c} h C(β'_k, 2) R^{k̄ k̄}_{c̄ ī} T_n[α, β'],  β' = β - e_c + 2 e_k - e_i
        + Σ_c h β'_1 β'_2 R^{2̄ 1̄}_{c̄ ī} T_n[α, β'],     β' = β - e_c + e_1 + e_2 - e_i
    and returns the entries (a, b) where they differ.  Nothing here shares
    code with the matrix assembly.
    """
    g = coeffs.geometry.metric.g
    R = coeffs.geometry.curvature
    T, P = coeffs[n], coeffs[n - 1]
    i = direction

    def t_n(beta, a):
        if min(beta) < 0:
            return ZERO_RF
        return T.rows[a][beta[1]]

    def t_prev(alpha, beta):
        if min(alpha) < 0 or min(beta) < 0:
            return ZERO_RF
        return P.rows[alpha[1]][beta[1]]

    bad = {}
    for a in range(n + 1):
        for b in range(n + 1):
            alpha, beta = [n - a, a], [n - b, b]
            lhs = ZERO_RF
            for d in range(2):
                al = alpha[:]
                al[d] -= 1
                be = beta[:]
                be[i] -= 1
                lhs = lhs + HBAR * g[i][d] * t_prev(al, be)
            rhs = T.rows[a][b] * beta[i]
            for k in range(2):
                for c in range(2):
                    be = beta[:]
                    be[c] -= 1
                    be[k] += 2
                    be[i] -= 1
                    weight = binom(be[k], 2) if be[k] >= 0 else 0
                    if weight and R[k, k, c, i]:
                        rhs = rhs + HBAR * (R[k, k, c, i] * weight) * t_n(be, a)
            for c in range(2):
                be = beta[:]
                be[c] -= 1
                be[0] += 1
                be[1] += 1
                be[i] -= 1
                weight = be[0] * be[1] if min(be) >= 0 else 0
                if weight and R[1, 0, c, i]:
                    rhs = rhs + HBAR * (R[1, 0, c, i] * weight) * t_n(be, a)
            if lhs != rhs:
                bad[(a + 1, b + 1)] = (str(lhs), str(rhs))
    return bad


def verify_raw_recurrence(coeffs: StarCoefficients, n: int) -> list[CheckResult]:
    out = []
    for direction in range(2):
        bad = raw_recurrence_residuals(coeffs, n, direction)
        name = f"raw recurrence (direction {direction + 1})"
        if not bad:
            out.append(CheckResult(name, n, True))
        else:
            where = min(bad)
            out.append(CheckResult(name, n, False, (where, *bad[where])))
    return out


def verify_denominators(coeffs: StarCoefficients, n: int) -> CheckResult:
    """Every denominator of T_n divides det X_2 ... det X_n."""
    product = HbarPolynomial((1,))
    for k in range(2, n + 1):
        product = product * determinant(build_X(k, coeffs.geometry.curvature)).num
    for i, row in enumerate(coeffs[n].rows):
        for j, x in enumerate(row):
            _, rem = product.divmod(x.den)
            if rem:
                return CheckResult("denominators divide det X_2..det X_n", n, False, ((i + 1, j + 1), str(x.den), str(product)))
    return CheckResult("denominators divide det X_2..det X_n", n, True)


def determinant(M: FieldMatrix) -> GaussianRationalFunction:
    """Exact determinant by elimination."""
    n, m = M.shape
    if n != m:
        raise ValueError("determinant needs a square matrix")
    rows = [list(r) for r in M.rows]
    det = ONE_RF
    for c in range(n):
        pivot = next((r for r in range(c, n) if rows[r][c]), None)
        if pivot is None:
            return ZERO_RF
        if pivot != c:
            rows[c], rows[pivot] = rows[pivot], rows[c]
            det = -det
        det = det * rows[c][c]
        inv = rows[c][c].inverse()
        for r in range(c + 1, n):
            f = rows[r][c] * inv
            if f:
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[c])]
    return det


# One complex dimension -------------------------------------------------------


def one_dim_step(prev: GaussianRationalFunction, n: int, g11, rtilde) -> GaussianRationalFunction:
    """h g T^{n-1} = (n + C(n,2) h R̃) T^n, solved for T^n."""
    g11 = rf(g11)
    factor = rf(n) + HBAR * rf(binom(n, 2)) * rf(rtilde)
    return HBAR * g11 * prev / factor


def one_dim_advance(n: int, g11, rtilde) -> GaussianRationalFunction:
    """T^n for a curve with metric g11 and curvature R̃, starting from T^0 = 1."""
    value = ONE_RF
    for k in range(1, n + 1):
        value = one_dim_step(value, k, g11, rtilde)
    return value


# h-adic expansion of X_n^{-1} -----------------------------------------------


def neumann_inverse(n: int, R: CurvatureTensor2, order: int) -> FieldMatrix:
    """Σ_{p < order} (-h)^p / n^{p+1} H_n^p, the inverse of X_n modulo h^order."""
    H = build_H(n, R)
    term = FieldMatrix.identity(n + 1).scale(rf(GaussianRational(1, 0) / n))
    acc = term
    step = H.scale(-HBAR / n)
    for _ in range(1, order):
        term = term @ step
        acc = acc + term
    return acc


def truncate_matrix(M: FieldMatrix, order: int) -> FieldMatrix:
    """Entrywise power-series truncation modulo h^order."""
    return M.map(lambda x: GaussianRationalFunction.coerce(x.series(order)))
