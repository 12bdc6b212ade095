"""End-to-end acceptance criteria: exact equality throughout, each with a wall-clock bound."""

import itertools
import json
import random
from contextlib import contextmanager
from fractions import Fraction
from math import comb, factorial
from time import perf_counter

import pytest

from kahlerstar import cli, engine, oracles
from kahlerstar.exactalg import HBAR, ONE_RF, FieldMatrix, GaussianRational, rf
from kahlerstar.kahler import (
    Geometry,
    builtin_manifold,
    random_hermitian_metric,
    random_locally_symmetric_geometry,
    random_symmetric_curvature,
)
from kahlerstar.starcalc import (
    PhaseSpacePolynomial,
    check_axioms,
    check_separation,
    poisson_bracket,
    random_holomorphic,
    random_polynomial,
    star_product,
    voros_star,
)

BUILTINS = ("c2", "cp2", "q2")


@contextmanager
def time_limit(request, seconds):
    start = perf_counter()
    yield
    elapsed = perf_counter() - start
    request.node.user_properties.append(("elapsed", elapsed))
    assert elapsed < seconds, f"took {elapsed:.2f} s, limit {seconds} s"


def assert_checks(results):
    failed = [r.describe() for r in results if not r.passed]
    assert not failed, failed


@pytest.mark.criterion(1, "base cases T_0 = [1], T_1 = h g on 10 random metrics")
def test_base_cases(request):
    rng = random.Random(2024)
    with time_limit(request, 1):
        for _ in range(10):
            metric = random_hermitian_metric(rng)
            geo = Geometry(None, metric, random_symmetric_curvature(rng), "random")
            coeffs = engine.compute_sequence(geo, 1)
            assert coeffs[0] == FieldMatrix.identity(1)
            # Row index is the holomorphic slot: T_1[a][b] = h g_{b̄ a}.
            for a, b in itertools.product(range(2), repeat=2):
                assert coeffs[1].rows[a][b] == HBAR * metric.g[b][a]


@pytest.mark.criterion(2, "flat closed form for n <= 10")
def test_flat_closed_form(request):
    with time_limit(request, 5):
        coeffs = engine.compute_sequence(builtin_manifold("c2"), 10)
        for n in range(11):
            scale = HBAR ** n / rf(2 ** n * factorial(n))
            assert coeffs[n] == FieldMatrix.diagonal([scale * comb(n, i) for i in range(n + 1)])


@pytest.mark.criterion(3, "kernel product equals the exponential product on all monomial pairs")
def test_exponential_product_sweep(request):
    with time_limit(request, 30):
        coeffs = engine.compute_sequence(builtin_manifold("c2"), 8)
        monomials = [PhaseSpacePolynomial.monomial(e) for e in itertools.product(range(5), repeat=4)]
        for f in monomials:
            for g in monomials:
                assert star_product(f, g, coeffs) == voros_star(f, g), (f, g)


@pytest.mark.criterion(4, "projective closed form at the origin for n <= 8")
def test_projective_closed_form(request):
    with time_limit(request, 10):
        coeffs = engine.compute_sequence(builtin_manifold("cp2"), 8)
        for n in range(9):
            denom = rf(factorial(n))
            for k in range(1, n):
                denom = denom * (ONE_RF - HBAR * k)
            scale = HBAR ** n / denom
            assert coeffs[n] == FieldMatrix.diagonal([scale * comb(n, i) for i in range(n + 1)])


@pytest.mark.criterion(5, "dual identity for n <= 8 on built-ins and 20 random inputs")
def test_dual_identity(request):
    geometries = [builtin_manifold(name) for name in BUILTINS]
    geometries += [random_locally_symmetric_geometry(random.Random(seed)) for seed in range(20)]
    with time_limit(request, 60):
        for geo in geometries:
            coeffs = engine.compute_sequence(geo, 8)
            for n in range(1, 9):
                assert_checks(engine.verify_dual_identity(coeffs, n))
            # Second order, one component at a time.
            T, Y = coeffs[2], engine.build_Y(2, geo.curvature)
            C = engine.assemble_C_prime(2, geo.metric, coeffs[1]).scale(HBAR)
            TY, YT = T @ Y, Y.dagger() @ T
            for i, j in itertools.product(range(3), repeat=2):
                assert TY.rows[i][j] == C.rows[i][j], (geo.name, i, j)
                assert YT.rows[i][j] == C.rows[j][i].conjugate(), (geo.name, i, j)


@pytest.mark.criterion(6, "raw recurrence in both directions for n <= 6 on built-ins")
def test_raw_recurrence(request):
    with time_limit(request, 30):
        for name in BUILTINS:
            coeffs = engine.compute_sequence(builtin_manifold(name), 6)
            for n in range(1, 7):
                results = engine.verify_raw_recurrence(coeffs, n)
                assert len(results) == 2
                assert_checks(results)


@pytest.mark.criterion(7, "hermiticity for n <= 8 on geometric inputs")
def test_hermiticity(request):
    geometries = [builtin_manifold(name) for name in BUILTINS]
    geometries += [random_locally_symmetric_geometry(random.Random(seed)) for seed in range(200, 208)]
    with time_limit(request, 10):
        for geo in geometries:
            coeffs = engine.compute_sequence(geo, 8)
            assert_checks([engine.verify_hermiticity(coeffs, n) for n in range(9)])


@pytest.mark.criterion(8, "direct second-order solution equals engine T_2 on 50 random inputs")
def test_second_order_equivalence(request):
    rng = random.Random(8)
    with time_limit(request, 10):
        for _ in range(50):
            geo = Geometry(None, random_hermitian_metric(rng), random_symmetric_curvature(rng), "random")
            assert oracles.hs_n2_closed_form(geo.metric, geo.curvature) == engine.compute_sequence(geo, 2)[2]


@pytest.mark.criterion(9, "one-dimensional chain equals the product formula for n <= 10")
def test_one_dimensional_formula(request):
    samples = [
        (Fraction(1), Fraction(0)),
        (Fraction(1), Fraction(2)),
        (Fraction(2, 3), Fraction(-5, 7)),
        (Fraction(7, 2), Fraction(3, 11)),
        (Fraction(5, 9), Fraction(-4)),
    ]
    with time_limit(request, 5):
        for g, R in samples:
            g, R = GaussianRational(g), GaussianRational(R)
            for n in range(11):
                assert engine.one_dim_advance(n, g, rf(R) / 2) == oracles.one_dim_product_formula(n, g, R), (g, R, n)


@pytest.mark.criterion(10, "factorized path equals the direct chain for N <= 6")
def test_path_equivalence(request):
    geometries = [builtin_manifold(name) for name in BUILTINS]
    geometries += [random_locally_symmetric_geometry(random.Random(seed)) for seed in range(100, 110)]
    with time_limit(request, 60):
        for geo in geometries:
            assert engine.compute_via_factorization(geo, 6) == engine.compute_sequence(geo, 6).tables, geo.name


@pytest.mark.criterion(11, "star product axioms and separation of variables on the flat plane")
def test_axioms(request):
    rng = random.Random(11)
    with time_limit(request, 60):
        coeffs = engine.compute_sequence(builtin_manifold("c2"), 8)
        for _ in range(50):
            f, g, h = (random_polynomial(rng) for _ in range(3))
            report = check_axioms(f, g, h, coeffs)
            assert report.passed, report.failures
            assert poisson_bracket(f, g) == -poisson_bracket(g, f)
        for _ in range(20):
            a = random_holomorphic(rng)
            b = random_holomorphic(rng, anti=True)
            report = check_separation(a, random_polynomial(rng), b, coeffs)
            assert report.passed, report.failures


@pytest.mark.criterion(12, "truncated Neumann inverse agrees with the exact inverse modulo h^5")
def test_neumann_consistency(request):
    rng = random.Random(12)
    tensors = [builtin_manifold("cp2").curvature] + [random_symmetric_curvature(rng) for _ in range(3)]
    with time_limit(request, 5):
        for R in tensors:
            for k in range(1, 6):
                exact = engine.build_X(k, R).inverse()
                assert engine.truncate_matrix(engine.neumann_inverse(k, R, 5), 5) == engine.truncate_matrix(exact, 5)


@pytest.mark.criterion(13, "demo on the quadric to N = 4 passes every check, byte-stable output")
def test_demo_smoke(request, tmp_path):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    with time_limit(request, 60):
        assert cli.main(["demo", "--out", str(first)]) == 0
        assert cli.main(["demo", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    doc = json.loads(first.read_text(encoding="utf-8"))
    assert doc["manifold"] == "q2" and doc["orders"] == {"from": 0, "to": 4}
    assert doc["passed"] and doc["checks"] and all(c["passed"] for c in doc["checks"])
    assert {f"T_{n}" for n in range(5)} <= set(doc["tables"])
