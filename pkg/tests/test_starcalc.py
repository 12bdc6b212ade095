import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kahlerstar import engine
from kahlerstar.exactalg import HBAR, ONE_RF, rf
from kahlerstar.kahler import CurvatureTensor2, Geometry, builtin_manifold, random_hermitian_metric
from kahlerstar.starcalc import (
    InsufficientOrderError,
    PhaseSpacePolynomial,
    apply_D,
    check_axioms,
    check_separation,
    random_holomorphic,
    random_polynomial,
    star_product,
    star_product_via_operators,
    voros_star,
)

P = PhaseSpacePolynomial.parse
FLAT = engine.compute_sequence(builtin_manifold("c2"), 8)


def test_D_examples():
    assert apply_D(P("zb1"), ("holo", 1)) == P("2")
    assert apply_D(P("z1"), ("holo", 1)) == P("0")
    assert apply_D(P("zb2*z1"), ("holo", 2)) == P("2*z1")
    assert apply_D(P("z2^2"), ("anti", 2)) == P("4*z2")


def test_D_rejects_bad_direction():
    with pytest.raises(ValueError):
        apply_D(P("z1"), ("holo", 3))


def test_unit():
    g = P("z1*zb2 + 3*i*z2^2")
    assert star_product(P("1"), g, FLAT) == g
    assert star_product(g, P("1"), FLAT) == g


def test_basic_products():
    assert star_product(P("zb1"), P("z1"), FLAT) == P("z1*zb1 + 2*h")
    assert star_product(P("z1"), P("zb1"), FLAT) == P("z1*zb1")


def test_exponential_product_examples():
    assert voros_star(P("zb1"), P("z1")) == P("z1*zb1 + 2*h")
    expected = P("z1*z2*zb1*zb2 + 2*h*(z2*zb2 + z1*zb1) + 4*h^2")
    assert voros_star(P("zb1*zb2"), P("z1*z2")) == expected
    assert voros_star(P("1"), P("1")) == P("1")


def test_insufficient_order():
    shallow = engine.compute_sequence(builtin_manifold("c2"), 1)
    with pytest.raises(InsufficientOrderError, match="order 2"):
        star_product(P("zb1^2"), P("z1^2"), shallow)


def test_curved_coefficients_rejected():
    with pytest.raises(ValueError):
        star_product(P("zb1"), P("z1"), engine.compute_sequence(builtin_manifold("cp2"), 2))


def test_matches_exponential_on_small_monomials():
    pool = [PhaseSpacePolynomial.monomial(e) for e in itertools.product(range(3), repeat=4)]
    rng = random.Random(0)
    for f, g in itertools.product(rng.sample(pool, 12), rng.sample(pool, 12)):
        assert star_product(f, g, FLAT) == voros_star(f, g)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_conjugation_law(seed):
    rng = random.Random(seed)
    f, g = random_polynomial(rng), random_polynomial(rng)
    lhs = star_product(f, g, FLAT).conjugate()
    rhs = star_product(g.conjugate(), f.conjugate(), FLAT)
    assert lhs == rhs


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_classical_limit(seed):
    rng = random.Random(seed)
    f, g = random_polynomial(rng), random_polynomial(rng)
    assert star_product(f, g, FLAT).hbar_coefficient(0) == f * g


def test_axioms_on_example_triple():
    assert check_axioms(P("z1"), P("zb1"), P("z1"), FLAT).passed


def test_first_order_antisymmetric_part():
    f, g = P("zb1"), P("z1")
    diff = star_product(f, g, FLAT) - star_product(g, f, FLAT)
    assert diff.hbar_coefficient(1) == P("2")
    assert diff == P("2*h")


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_axioms_on_random_triples(seed):
    rng = random.Random(seed)
    report = check_axioms(random_polynomial(rng), random_polynomial(rng), random_polynomial(rng), FLAT)
    assert report.passed, report.failures


def test_separation_examples():
    assert check_separation(P("z1^3"), P("zb1*zb2"), P("1"), FLAT).passed
    assert check_separation(P("1"), P("z1"), P("zb2^2"), FLAT).passed


@settings(max_examples=15, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_separation_sweep(seed):
    rng = random.Random(seed)
    f = random_polynomial(rng, max_degree=4)
    assert check_separation(P("z1 + z2"), f, random_holomorphic(rng, anti=True), FLAT).passed


def test_separation_rejects_wrong_kind():
    with pytest.raises(ValueError):
        check_separation(P("zb1"), P("1"), P("1"), FLAT)


def test_parse_and_render():
    f = P("1/2*h*z1*zb2 - i*z2^2")
    assert P(str(f)) == f
    assert f.hbar_coefficient(1) == P("1/2*z1*zb2")


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_kernel_route_matches_operator_route(seed):
    rng = random.Random(seed)
    metric = random_hermitian_metric(rng)
    coeffs = engine.compute_sequence(Geometry(None, metric, CurvatureTensor2.zero(), "flat"), 6)
    f = random_polynomial(rng) + P("h*zb1*zb2 + zb2^2")
    g = random_polynomial(rng).scale(ONE_RF / (ONE_RF - HBAR))
    assert star_product(f, g, coeffs) == star_product_via_operators(f, g, coeffs)


def test_kernel_cache_tracks_table_changes():
    coeffs = engine.compute_sequence(builtin_manifold("c2"), 2)
    before = star_product(P("zb1"), P("z1"), coeffs)
    coeffs.tables[1] = coeffs.tables[1].scale(rf(2))
    after = star_product(P("zb1"), P("z1"), coeffs)
    assert before == P("z1*zb1 + 2*h") and after == P("z1*zb1 + 4*h")
