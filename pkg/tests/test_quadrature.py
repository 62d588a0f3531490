"""Adaptive quadrature, tails, weighted rules and principal values."""

from __future__ import annotations

import math

import numpy as np
import pytest

from nlop.kernels import KernelSpec, build
from nlop.quadrature import (
    Annulus,
    Ball,
    DivergentIntegralError,
    Interval,
    QuadConfig,
    QuadResult,
    gk_interval,
    gk_rectangle,
    integrate_region,
    integrate_tail,
    integrate_unit_interval_weighted,
    jacobi_rule,
    pv_second_difference,
)


def test_gk_interval_smooth_and_kink():
    res = gk_interval(np.exp, 0.0, 1.0)
    assert res.value == pytest.approx(math.e - 1, abs=1e-12)
    assert res.converged and res.err_est < 1e-8
    res = gk_interval(lambda t: np.abs(t - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert res.value == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-12)


def test_gk_interval_endpoint_singularity():
    res = gk_interval(lambda t: t ** -0.5, 0.0, 1.0, QuadConfig(abs_tol=1e-10, rel_tol=1e-10))
    assert res.value == pytest.approx(2.0, abs=1e-7)


def test_gk_interval_reversed_and_vector_valued():
    res = gk_interval(lambda t: np.stack([t, t**2], axis=1), 1.0, 0.0)
    np.testing.assert_allclose(res.value, [-0.5, -1 / 3], atol=1e-13)
    assert gk_interval(np.sin, 2.0, 2.0).value == 0.0


def test_gk_rectangle_product():
    res = gk_rectangle(lambda p: np.cos(p[:, 0]) * p[:, 1] ** 2, (0.0, math.pi / 2), (0.0, 1.0))
    assert res.value == pytest.approx(1 / 3, abs=1e-11)


def test_regions():
    assert integrate_region(np.sin, Interval(0.0, math.pi)).value == pytest.approx(2.0, abs=1e-12)
    one = lambda p: np.ones(p.shape[0])
    assert integrate_region(one, Annulus((0.0, 0.0), 1.0, 2.0)).value == pytest.approx(3 * math.pi, abs=1e-10)
    assert integrate_region(lambda p: p[:, 0] ** 2, Ball((0.5,), 1.0)).value == pytest.approx(
        (1.5**3 + 0.5**3) / 3, abs=1e-12)
    with pytest.raises(ValueError):
        integrate_region(one, Annulus((0.0,), 2.0, 1.0))


def test_tail_certified_power_law():
    res = integrate_tail(lambda y: np.abs(y[:, 0]) ** -3.0, 1.0, 0.0, 3.0)
    assert abs(res.value - 1.0) <= max(res.err_est, 1e-9) + 1e-9
    res2 = integrate_tail(lambda y: np.linalg.norm(y, axis=1) ** -4.0, 1.0, 0.0, 4.0, n=2)
    assert res2.value == pytest.approx(math.pi, abs=1e-6)


def test_tail_rapid_decay_and_divergence():
    res = integrate_tail(lambda y: np.exp(-np.abs(y[:, 0])), 1.0, 0.0, math.inf)
    assert res.value == pytest.approx(2 * math.exp(-1), abs=1e-9)
    with pytest.raises(DivergentIntegralError):
        integrate_tail(lambda y: 1 / np.abs(y[:, 0]), 1.0, 0.0, 1.0)


def test_jacobi_rule_moments():
    for m in (1, 2, 3):
        t, w = jacobi_rule(m, 8)
        for k in range(6):
            exact = math.gamma(k + 1) * math.gamma(m) / math.gamma(k + m + 1)
            assert np.dot(w, t**k) == pytest.approx(exact, rel=1e-13)
    res = integrate_unit_interval_weighted(np.cos, 2)
    assert res.value == pytest.approx(1 - math.cos(1.0), abs=1e-13)
    with pytest.raises(ValueError):
        integrate_unit_interval_weighted(np.cos, 0)


def test_quadresult_arithmetic():
    a = QuadResult(1.0, 0.1, 3)
    b = QuadResult(2.0, -0.2, 4, converged=False, diagnostic="x")
    c = a + b
    assert c.value == 3.0 and c.err_est == pytest.approx(0.3) and c.evaluations == 7 and not c.converged
    d = (a - b).scale(-2)
    assert d.value == 2.0 and d.err_est == pytest.approx(0.6)
    assert QuadResult.zero((2,)).value.shape == (2,)


def frac_lap(s):
    return build(KernelSpec("frac_lap", s=s))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_pv_second_difference_quadratic(s):
    # u = y^2: the odd part cancels, leaving -int_{|z|<r} z^2 |z|^{-1-2s} dz
    K = frac_lap(s)
    c = K.profile(np.array([[1.0]]))[0]
    u = lambda p: p[:, 0] ** 2
    for x, r in ((0.0, 1.0), (0.3, 0.5)):
        res = pv_second_difference(u, K, np.array([x]), r)
        exact = -2 * c * r ** (2 - 2 * s) / (2 - 2 * s)
        assert isinstance(res.value, float)
        assert res.value == pytest.approx(exact, rel=1e-8)


def test_pv_second_difference_split_invariance():
    # P.V. over B_r equals P.V. over B_{r/2} plus the regular annulus
    K = frac_lap(0.75)
    u = lambda p: np.sin(2 * p[:, 0]) + p[:, 0] ** 3
    x = np.array([[0.2], [-0.4]])
    whole = pv_second_difference(u, K, x, 0.8)
    inner = pv_second_difference(u, K, x, 0.4)
    for i, xi in enumerate(x[:, 0]):
        ring = integrate_region(lambda y: (u(np.array([[xi]]))[0] - u(y)) * K(np.array([[xi]]), y),
                                Annulus((xi,), 0.4, 0.8))
        assert whole.value[i] == pytest.approx(inner.value[i] + ring.value, abs=1e-7)


def test_pv_second_difference_two_dimensions():
    K = build(KernelSpec("frac_lap", dim=2, s=0.5))
    c = K.profile(np.array([[1.0, 0.0]]))[0]
    u = lambda p: np.sum(p**2, axis=1)
    res = pv_second_difference(u, K, np.array([0.1, -0.2]), 1.0)
    # -c int_{B_1} |z|^2 |z|^{-3} dz = -2 pi c
    assert res.value == pytest.approx(-2 * math.pi * c, rel=1e-7)


def test_pv_second_difference_per_point_radius():
    K = frac_lap(0.5)
    u = lambda p: p[:, 0] ** 2
    res = pv_second_difference(u, K, np.array([[0.0], [0.0]]), np.array([1.0, 0.25]))
    c = K.profile(np.array([[1.0]]))[0]
    np.testing.assert_allclose(res.value, [-2 * c, -2 * c * 0.25], rtol=1e-8)
    with pytest.raises(ValueError):
        pv_second_difference(u, K, np.array([0.0]), 0.0)


def test_pv_divergence_is_reported():
    # a kink at x is too rough for s = 3/4: the shells grow toward the diagonal
    K = frac_lap(0.75)
    res = pv_second_difference(lambda p: np.abs(p[:, 0]), K, np.array([0.0]), 1.0)
    assert not res.converged
