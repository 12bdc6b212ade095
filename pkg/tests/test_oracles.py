import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerstar import engine, oracles
from kahlerstar.exactalg import HBAR, ONE_RF, FieldMatrix, GaussianRational, binom, rf
from kahlerstar.kahler import (
    Geometry,
    builtin_manifold,
    random_hermitian_metric,
    random_symmetric_curvature,
)


def test_shift_matrix_relations():
    for m in range(1, 6):
        down = oracles.ShiftMatrix(m, "down").matrix()
        right = oracles.ShiftMatrix(m, "right").matrix()
        assert down @ right == FieldMatrix.diagonal([0] + [1] * (m - 1))
        assert down.transpose() == right


def test_shift_kind_validated():
    with pytest.raises(ValueError):
        oracles.ShiftMatrix(3, "up")


@pytest.mark.parametrize("k", range(4))
@pytest.mark.parametrize("l", range(4))
def test_shift_sandwich_single_entry(k, l):
    M = oracles.shift_sandwich(k, l, 4)
    for i in range(4):
        for j in range(4):
            assert M.rows[i][j] == (1 if (i, j) == (k, l) else 0)


@pytest.mark.parametrize("n", range(0, 7))
def test_shift_sandwich_weight_identity(n):
    size = n + 1
    D = oracles.weight_diagonal(n, size)
    for k in range(n + 1):
        for l in range(n + 1):
            S = oracles.shift_sandwich(k, l, size)
            assert S @ D == S.scale(rf(n - 2 * l))


def test_gamma_ratio_recursion():
    value = oracles.gamma_ratio_coefficient(0)
    assert value == ONE_RF
    for n in range(1, 13):
        value = oracles.gamma_ratio_step(value, n)
        assert value == oracles.gamma_ratio_coefficient(n)


def test_flat_closed_form_values():
    assert oracles.c2_closed_form(0) == FieldMatrix.identity(1)
    assert oracles.c2_closed_form(2) == FieldMatrix.diagonal([1, 2, 1]).scale(HBAR ** 2 / 8)
    assert oracles.c2_closed_form(3) == FieldMatrix.diagonal([1, 3, 3, 1]).scale(HBAR ** 3 / 48)


def test_projective_closed_form_values():
    assert oracles.cp2_closed_form(1) == FieldMatrix.identity(2).scale(HBAR)
    assert oracles.cp2_closed_form(2) == FieldMatrix.diagonal([1, 2, 1]).scale(HBAR ** 2 / ((ONE_RF - HBAR) * 2))
    expected = FieldMatrix.diagonal([1, 3, 3, 1]).scale(HBAR ** 3 / ((ONE_RF - HBAR) * (ONE_RF - HBAR * 2) * 6))
    assert oracles.cp2_closed_form(3) == expected


def test_projective_closed_form_is_binomial_diagonal():
    for n in range(11):
        cn = oracles.gamma_ratio_coefficient(n)
        assert oracles.cp2_closed_form(n) == FieldMatrix.diagonal([cn * binom(n, i) for i in range(n + 1)])


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=0, max_value=5))
def test_word_polynomial_matches_enumeration(seed, n):
    g = random_hermitian_metric(random.Random(seed))
    assert oracles.metric_word_polynomial(n, g) == oracles.metric_word_sum_bruteforce(n, g)


def test_direct_second_order_flat_and_projective():
    c2 = builtin_manifold("c2")
    cp2 = builtin_manifold("cp2")
    assert oracles.hs_n2_closed_form(c2.metric, c2.curvature) == oracles.c2_closed_form(2)
    assert oracles.hs_n2_closed_form(cp2.metric, cp2.curvature) == oracles.cp2_closed_form(2)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_direct_second_order_matches_engine(seed):
    rng = random.Random(seed)
    geo = Geometry(None, random_hermitian_metric(rng), random_symmetric_curvature(rng), "random")
    assert oracles.hs_n2_closed_form(geo.metric, geo.curvature) == engine.compute_sequence(geo, 2)[2]


def test_one_dim_formula_values():
    g = GaussianRational(5) / 2
    assert oracles.one_dim_product_formula(1, g, 7) == HBAR * g
    assert oracles.one_dim_product_formula(4, 1, 0) == HBAR ** 4 / 24
    assert oracles.one_dim_product_formula(2, 1, 2) == HBAR ** 2 / (HBAR + 2)


def test_one_dim_formula_matches_recursion():
    for g, R in [(1, 0), (GaussianRational(2) / 3, 4), (3, GaussianRational(-5) / 7)]:
        for n in range(11):
            assert engine.one_dim_advance(n, g, rf(R) / 2) == oracles.one_dim_product_formula(n, g, R)


def test_oracles_do_not_import_engine():
    import ast
    import inspect

    tree = ast.parse(inspect.getsource(oracles))
    imported = {
        node.module for node in ast.walk(tree) if isinstance(node, ast.ImportFrom) and node.module
    }
    assert "engine" not in imported
