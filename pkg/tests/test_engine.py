import random
from math import factorial

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerstar import engine
from kahlerstar.exactalg import HBAR, ONE_RF, FieldMatrix, GaussianRational, rf
from kahlerstar.kahler import (
    CurvatureTensor2,
    Geometry,
    HermitianMetric2,
    builtin_manifold,
    random_hermitian_metric,
    random_locally_symmetric_geometry,
    random_symmetric_curvature,
)
from kahlerstar.oracles import c2_closed_form

CP2 = builtin_manifold("cp2")
C2 = builtin_manifold("c2")
Q2 = builtin_manifold("q2")


def band_is_pentadiagonal(M):
    rows, cols = M.shape
    return all(not M.rows[i][j] for i in range(rows) for j in range(cols) if abs(i - j) > 2)


# Structure matrices ---------------------------------------------------------


def test_X_flat_is_scalar():
    for n in range(1, 6):
        assert engine.build_X(n, CurvatureTensor2.zero()) == FieldMatrix.identity(n + 1).scale(rf(n))


def test_X1_is_identity_for_any_curvature():
    R = random_symmetric_curvature(random.Random(3))
    assert engine.build_X(1, R) == FieldMatrix.identity(2)


def test_X2_projective():
    assert engine.build_X(2, CP2.curvature) == FieldMatrix.identity(3).scale((ONE_RF - HBAR) * 2)


def test_Y1():
    assert engine.build_Y(1, CP2.curvature) == FieldMatrix.diagonal([1, -1])


def test_Y_flat():
    assert engine.build_Y(3, CurvatureTensor2.zero()) == FieldMatrix.diagonal([3, 1, -1, -3])


def test_Y2_projective_frozen():
    Y = engine.build_Y(2, CP2.curvature)
    assert Y == FieldMatrix.diagonal([2 - HBAR * 2, 0, HBAR * 2 - 2])


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=16))
def test_pentadiagonal(seed, n):
    R = random_symmetric_curvature(random.Random(seed))
    assert band_is_pentadiagonal(engine.build_X(n, R))
    assert band_is_pentadiagonal(engine.build_Y(n, R))


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=8))
def test_X_decomposition(seed, n):
    R = random_symmetric_curvature(random.Random(seed))
    H = engine.build_H(n, R)
    assert engine.build_X(n, R) == FieldMatrix.identity(n + 1).scale(rf(n)) + H.scale(HBAR)
    assert all(x.is_constant() for row in H.rows for x in row)


@pytest.mark.parametrize("n", range(1, 6))
@pytest.mark.parametrize("P", range(0, 5))
def test_neumann_series(n, P):
    R = random_symmetric_curvature(random.Random(10 * n + P))
    exact = engine.build_X(n, R).inverse()
    approx = engine.neumann_inverse(n, R, P + 1)
    assert engine.truncate_matrix(exact, P + 1) == engine.truncate_matrix(approx, P + 1)


def test_A_prime_first_order():
    g = random_hermitian_metric(random.Random(1))
    A = engine.assemble_A_prime(1, g, FieldMatrix.identity(1))
    assert A == g.matrix().transpose()


def test_A_prime_flat_second_order():
    T1 = FieldMatrix.diagonal([HBAR / 2, HBAR / 2])
    half = GaussianRational(1) / 2
    A = engine.assemble_A_prime(2, C2.metric, T1)
    assert A == FieldMatrix.diagonal([HBAR * (half / 2), HBAR * half, HBAR * (half / 2)])


def test_C_prime_first_order():
    g = random_hermitian_metric(random.Random(2))
    C = engine.assemble_C_prime(1, g, FieldMatrix.identity(1))
    G = g.g
    assert C == FieldMatrix([[G[0][0], -G[1][0]], [G[0][1], -G[1][1]]])


def test_C_prime_diagonal_metric():
    g = HermitianMetric2([[2, 0], [0, 5]])
    prev = FieldMatrix([[HBAR, 3], [HBAR * 2, 7]])
    C = engine.assemble_C_prime(2, g, prev)
    expected = prev.padded(3).scale(rf(2)) - (FieldMatrix.down_shift(3) @ prev.padded(3) @ FieldMatrix.right_shift(3)).scale(rf(5))
    assert C == expected


# Chains ---------------------------------------------------------------------


def test_base_cases():
    g = random_hermitian_metric(random.Random(4))
    geo = Geometry(None, g, CurvatureTensor2.zero(), "random")
    coeffs = engine.compute_sequence(geo, 1)
    assert coeffs[0] == FieldMatrix.identity(1)
    assert coeffs[1] == g.matrix().transpose().scale(HBAR)


def test_order_zero():
    assert engine.compute_sequence(CP2, 0).tables == [FieldMatrix.identity(1)]


def test_flat_third_order():
    T3 = engine.compute_sequence(C2, 3)[3]
    assert T3 == FieldMatrix.diagonal([1, 3, 3, 1]).scale(HBAR ** 3 / 48)


def test_flat_chain_matches_closed_form():
    coeffs = engine.compute_sequence(C2, 5)
    for n in range(6):
        assert coeffs[n] == c2_closed_form(n)


def test_projective_second_order():
    T2 = engine.compute_sequence(CP2, 2)[2]
    assert T2 == FieldMatrix.diagonal([1, 2, 1]).scale(HBAR ** 2 / ((ONE_RF - HBAR) * 2))


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        engine.compute_sequence(C2, -1)


def test_extend_to_reuses_prefix():
    coeffs = engine.compute_sequence(Q2, 2)
    first = coeffs.tables[:]
    coeffs.extend_to(4)
    assert coeffs.tables[:3] == first and coeffs.max_order == 4


@settings(max_examples=6, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_chain_matches_right_solve(seed):
    geo = random_locally_symmetric_geometry(random.Random(seed))
    tables = [FieldMatrix.identity(1)]
    for n in range(1, 6):
        tables.append(engine.advance(tables[-1], geo, n))
    assert engine.compute_sequence(geo, 5).tables == tables


def test_extend_after_table_replaced():
    coeffs = engine.compute_sequence(CP2, 2)
    coeffs.tables[2] = coeffs.tables[2].scale(rf(3))
    coeffs.extend_to(3)
    assert coeffs[3] == engine.advance(coeffs[2], CP2, 3)


def test_flat_limit_with_scaled_metric():
    # R = 0 with g = c Id gives T_n = c^n h^n C(n, i) / n! on the diagonal.
    c = GaussianRational(3) / 2
    geo = Geometry(None, HermitianMetric2([[c, 0], [0, c]]), CurvatureTensor2.zero(), "scaled")
    coeffs = engine.compute_sequence(geo, 4)
    for n in range(5):
        expected = c2_closed_form(n).scale(rf((c * 2) ** n))
        assert coeffs[n] == expected


@settings(max_examples=8, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_lowest_order_structure(seed):
    geo = random_locally_symmetric_geometry(random.Random(seed))
    coeffs = engine.compute_sequence(geo, 3)
    flat = engine.compute_sequence(geo._replace(curvature=CurvatureTensor2.zero()), 3)
    for n in range(4):
        for x, y in zip(coeffs[n], flat[n]):
            for a, b in zip(x, y):
                assert not a or a.valuation() >= n
                assert a.series(n + 1) == b.series(n + 1)


# Identities -----------------------------------------------------------------


@pytest.mark.parametrize("geo", [C2, CP2, Q2], ids=["c2", "cp2", "q2"])
def test_identity_suite_on_builtins(geo):
    coeffs = engine.compute_sequence(geo, 6)
    for n in range(1, 7):
        results = (
            engine.verify_dual_identity(coeffs, n)
            + engine.verify_raw_recurrence(coeffs, n)
            + [engine.verify_hermiticity(coeffs, n), engine.verify_denominators(coeffs, n)]
        )
        assert all(r.passed for r in results), [r.describe() for r in results if not r.passed]


@settings(max_examples=6, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_identity_suite_on_random_frames(seed):
    geo = random_locally_symmetric_geometry(random.Random(seed))
    coeffs = engine.compute_sequence(geo, 4)
    for n in range(1, 5):
        results = engine.verify_dual_identity(coeffs, n) + engine.verify_raw_recurrence(coeffs, n)
        results.append(engine.verify_hermiticity(coeffs, n))
        assert all(r.passed for r in results), [r.describe() for r in results if not r.passed]


def test_failing_check_reports_location():
    coeffs = engine.compute_sequence(CP2, 2)
    coeffs.tables[2] = coeffs.tables[2] + FieldMatrix([[0, 0, 0], [0, 0, HBAR], [0, 0, 0]])
    result = engine.verify_hermiticity(coeffs, 2)
    assert not result.passed
    where, lhs, rhs = result.mismatch
    assert where == (2, 3)
    assert lhs != rhs
    assert "mismatch at (2, 3)" in result.describe()


def test_nonlocally_symmetric_curvature_breaks_identities():
    # Pair-symmetric curvature that is not geometric fails the dual identity.
    geo = Geometry(None, CP2.metric, random_symmetric_curvature(random.Random(5)), "synthetic")
    coeffs = engine.compute_sequence(geo, 3)
    results = [r for n in range(1, 4) for r in engine.verify_dual_identity(coeffs, n)]
    assert not all(r.passed for r in results)


# Factorized path ------------------------------------------------------------


@pytest.mark.parametrize("geo", [C2, CP2, Q2], ids=["c2", "cp2", "q2"])
def test_factorized_path_matches(geo):
    assert engine.compute_via_factorization(geo, 6) == engine.compute_sequence(geo, 6).tables


def test_factorized_word_expansion_matches_nesting():
    geo = random_locally_symmetric_geometry(random.Random(11))
    assert engine.compute_via_factorization(geo, 3, expand_words=True) == engine.compute_via_factorization(geo, 3)


def test_factorized_first_order_is_metric():
    geo = random_locally_symmetric_geometry(random.Random(12))
    assert engine.compute_via_factorization(geo, 1)[1] == geo.metric.matrix().transpose().scale(HBAR)


def test_custom_theta():
    half = GaussianRational(1) / 2
    theta = [((half, 0), (1, 0)), ((0, half), (0, 1))]
    assert engine.compute_via_factorization(C2, 4, theta) == engine.compute_sequence(C2, 4).tables


def test_bad_theta_rejected():
    theta = [((1, 0), (1, 0)), ((0, 1), (0, 1))]
    with pytest.raises(ValueError, match="does not reproduce"):
        engine.compute_via_factorization(C2, 2, theta)


# One dimension --------------------------------------------------------------


def test_one_dim_first_order():
    g = GaussianRational(7) / 3
    assert engine.one_dim_advance(1, g, 5) == HBAR * g


def test_one_dim_flat():
    for n in range(6):
        expected = HBAR ** n / rf(factorial(n))
        assert engine.one_dim_advance(n, 1, 0) == expected


def test_one_dim_third_order():
    expected = HBAR ** 3 / ((HBAR + 2) * (HBAR * 3 + 3))
    assert engine.one_dim_advance(3, 1, 1) == expected
