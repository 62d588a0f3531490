"""Multi-indices, polynomials and least-squares fits."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlop.multiindex import (
    DegenerateSampleError,
    MultiIndex,
    Polynomial,
    best_poly_fit,
    binom_multi,
    enumerate_multi_indices,
    factorial,
    monomial,
    solution_space_dim,
)


def brute_count(n: int, m: int) -> int:
    return sum(1 for a in itertools.product(range(m), repeat=n) if sum(a) <= m - 1)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("m", range(0, 7))
def test_solution_space_dim_matches_enumeration(n, m):
    assert solution_space_dim(n, m) == brute_count(n, m)
    assert solution_space_dim(n, m) == len(enumerate_multi_indices(n, m - 1))


def test_solution_space_dim_closed_form():
    assert solution_space_dim(3, 4) == math.comb(3 + 3, 3)
    assert solution_space_dim(1, 0) == 0
    with pytest.raises(ValueError):
        solution_space_dim(0, 2)


def test_enumeration_is_graded_and_unique():
    idx = enumerate_multi_indices(3, 3)
    orders = [a.order for a in idx]
    assert orders == sorted(orders)
    assert len(set(idx)) == len(idx)


def test_multiindex_arithmetic():
    a, b = MultiIndex.of(2, 1), MultiIndex.of(1, 1)
    assert a.order == 3 and a.dim == 2
    assert a.minus(b) == MultiIndex.of(1, 0)
    assert b.plus(b) == MultiIndex.of(2, 2)
    assert b.leq(a) and not a.leq(b)
    assert factorial(a) == 2
    assert binom_multi(a, b) == 2
    with pytest.raises(ValueError):
        MultiIndex.of(-1, 0)
    with pytest.raises(ValueError):
        a.plus(MultiIndex.of(1))
    with pytest.raises(ValueError):
        binom_multi(b, a)


def test_monomial_values():
    x = np.array([[2.0, 3.0], [0.5, -1.0]])
    np.testing.assert_allclose(monomial((2, 1), x), [12.0, -0.25])
    assert monomial((0, 0), np.array([5.0, 7.0])) == 1.0


def test_polynomial_algebra():
    p = Polynomial(1, 2, {(0,): 1.0, (2,): 3.0})
    q = Polynomial(1, 1, {(1,): -2.0})
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose((p + q)(x), 1 - 2 * x + 3 * x**2)
    np.testing.assert_allclose((p - q)(x), 1 + 2 * x + 3 * x**2)
    np.testing.assert_allclose(p.scaled(2.0)(x), 2 + 6 * x**2)
    assert Polynomial.zero(2)(np.zeros((3, 2))).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        Polynomial(1, 1, {(2,): 1.0})


def test_from_vector_roundtrip():
    vec = np.arange(1.0, 7.0)
    p = Polynomial.from_vector(2, 2, vec)
    np.testing.assert_array_equal(p.coefficient_vector(), vec)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_best_fit_recovers_exact_quadratic(coef):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(12, 2)) / math.sqrt(2)
    vals = coef[0] + coef[1] * pts[:, 0] + coef[2] * pts[:, 0] * pts[:, 1]
    p, res = best_poly_fit((pts, vals), 2, 2)
    assert res <= 1e-10 * (1 + max(abs(c) for c in coef))
    np.testing.assert_allclose(p(pts), vals, atol=1e-9 * (1 + max(abs(c) for c in coef)))


def test_best_fit_residual_and_pairs():
    pts = np.linspace(-1, 1, 21)
    p, res = best_poly_fit([(t, abs(t)) for t in pts], 1, 0)
    assert res == pytest.approx(0.5, abs=0.05)
    p, res = best_poly_fit((pts[:, None], pts**3), 1, -1)
    assert res == pytest.approx(1.0)


def test_best_fit_degenerate_geometry():
    pts = np.zeros((10, 1))
    with pytest.raises(DegenerateSampleError):
        best_poly_fit((pts, np.ones(10)), 1, 1)
    with pytest.raises(DegenerateSampleError):
        best_poly_fit((np.array([[0.1], [0.2]]), np.ones(2)), 1, 2)


def test_best_fit_rejects_points_outside_ball():
    with pytest.raises(ValueError):
        best_poly_fit((np.array([[0.0], [2.0], [0.5]]), np.ones(3)), 1, 1)
