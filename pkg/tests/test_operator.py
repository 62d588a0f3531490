"""Decomposition, direct evaluation, tail bounds and the limit driver."""

from __future__ import annotations

import math

import numpy as np
import pytest

from nlop.exprfunc import builtin, resolve_function
from nlop.kernels import KernelSpec, build
from nlop.multiindex import best_poly_fit
from nlop.operator import (
    CutoffSpec,
    HypothesisError,
    decompose,
    default_grid,
    direct_apply,
    far_field,
    limit_driver,
    psi,
    psi_matrix,
    tail_bound,
)

X3 = np.array([-0.5, 0.0, 0.5])


def frac(s, **kw):
    return build(KernelSpec("frac_lap", s=s, **kw))


def test_cutoff_parse_and_values():
    t = CutoffSpec.parse("smooth:10,2")
    assert (t.kind, t.R, t.width) == ("smooth", 10.0, 2.0)
    assert CutoffSpec.parse("smooth:9").width == 3.0
    np.testing.assert_allclose(t(np.array([[0.0], [8.0], [10.0], [-12.0]])), [1, 1, 0, 0])
    assert 0 < t(np.array([[9.0]]))[0] < 1
    np.testing.assert_allclose(CutoffSpec("sharp", 5)(np.array([[4.9], [5.0]])), [1, 0])
    for bad in ("sharp:2", "smooth:6,4", "wide:5", "sharp"):
        with pytest.raises(ValueError):
            CutoffSpec.parse(bad)


def test_default_grid_shapes():
    g1, g2 = default_grid(1), default_grid(2)
    assert g1.shape == (33, 1) and np.all(np.abs(g1) < 1)
    assert g2.shape == (169, 2) and np.all(np.linalg.norm(g2, axis=1) < 1)


def test_psi_is_negative_taylor_remainder():
    K = build(KernelSpec("gauss"))
    x, y = 0.4, 2.5
    k = lambda xx: math.exp(-(xx - y) ** 2)
    d1 = -2 * (0 - y) * k(0)
    assert psi(K, 0, x, y) == pytest.approx(-k(x))
    assert psi(K, 1, x, y) == pytest.approx(-(k(x) - k(0)), rel=1e-10)
    assert psi(K, 2, x, y) == pytest.approx(-(k(x) - k(0) - d1 * x), rel=1e-10)


def test_psi_matrix_agrees_with_adaptive_psi():
    K = frac(0.75)
    X = np.array([[-0.7], [0.2], [0.9]])
    Y = np.array([[3.5], [-6.0], [40.0]])
    M = psi_matrix(K, 2, X, Y)
    for p in range(3):
        for j in range(3):
            assert M[p, j] == pytest.approx(psi(K, 2, X[j], Y[p]), rel=1e-10, abs=1e-16)


def test_direct_apply_getoor_oracle():
    K = frac(0.5, normalized=True)
    res = direct_apply(builtin("getoor", {"s": 0.5}), K, X3)
    np.testing.assert_allclose(res.value, 1.0, atol=1e-8)


def test_direct_apply_getoor_two_dimensions():
    K = build(KernelSpec("frac_lap", dim=2, s=0.5, normalized=True))
    res = direct_apply(builtin("getoor", {"s": 0.5}, 2), K, np.array([[0.0, 0.0], [0.3, 0.4]]))
    # 4^s Gamma(1+s) Gamma(n/2+s) / Gamma(n/2) = pi/2 for n = 2, s = 1/2
    assert np.all(np.abs(res.value - math.pi / 2) <= 10 * res.err_est + 1e-9)


def test_direct_apply_constant_is_zero():
    res = direct_apply(builtin("constant", {"c": 3.0}), build(KernelSpec("abel")), X3)
    np.testing.assert_allclose(res.value, 0.0, atol=1e-9)


@pytest.mark.parametrize("kernel", [KernelSpec("gauss"), KernelSpec("frac_lap", s=0.5)])
@pytest.mark.parametrize("m", [0, 1, 2])
@pytest.mark.parametrize("tau", [CutoffSpec("sharp", 8), CutoffSpec("smooth", 32)])
def test_reconstruction_identity_small(kernel, m, tau):
    K = build(kernel)
    u = resolve_function("x^2 * indicator(0, 20)")
    d = direct_apply(u, K, X3, tau)
    dec = decompose(u, K, tau, m, X3)
    assert np.all(np.abs(d.value - dec.total) <= 10 * (np.atleast_1d(d.err_est) + dec.err_est))


def test_decompose_two_dimensions():
    K = build(KernelSpec("gauss", dim=2))
    u = builtin("bump", {}, 2)
    X = np.array([[0.1, 0.2], [-0.5, 0.3]])
    tau = CutoffSpec("sharp", 8)
    d = direct_apply(u, K, X, tau)
    dec = decompose(u, K, tau, 1, X)
    assert np.all(np.abs(d.value - dec.total) <= 10 * (d.err_est + dec.err_est))


def test_decomposition_to_dict():
    dec = decompose(resolve_function("x"), frac(0.75), CutoffSpec("sharp", 8), 2, [0.25])
    out = dec.to_dict()
    assert set(out) >= {"f1", "f2", "fstar", "P", "theta", "total", "err_est"}
    assert len(out["P"]["coefficients"]) == 2


def test_input_validation():
    K = frac(0.5)
    u = builtin("bump")
    with pytest.raises(HypothesisError):
        direct_apply(u, K, [1.0])
    with pytest.raises(HypothesisError):
        decompose(u, K, CutoffSpec("sharp", 8), -1, [0.0])
    with pytest.raises(HypothesisError):
        decompose(builtin("bump", {}, 2), K, CutoffSpec("sharp", 8), 0, [0.0])
    with pytest.raises(HypothesisError):
        limit_driver(u, K, 0, R_schedule=[8, 4])


def test_tail_bound_monotone_and_zero_for_compact():
    K = frac(0.75)
    u = resolve_function("x")
    b = [tail_bound(u, K, 2, R) for R in (8, 16, 32)]
    assert b[0] > b[1] > b[2] > 0
    # sup |d^2_x |x-y|^-2.5| = 8.75 (|y|-1)^-4.5, so the bound is
    # 2 * 8.75 * int_{R-1}^inf (t+1) t^-4.5 dt
    for R, val in zip((8, 16, 32), b):
        exact = 17.5 * ((R - 1) ** -2.5 / 2.5 + (R - 1) ** -3.5 / 3.5)
        assert exact <= val <= exact * (1 + 1e-6)
    assert tail_bound(builtin("bump"), K, 0, 4) == 0.0


def test_far_field_of_function_supported_outside_b3():
    # f = A(u) for u supported in |y| > 3 is int u psi; for m = 0 that is -int u K
    K = build(KernelSpec("gauss"))
    u = builtin("indicator_annulus", {"lo": 3.5, "hi": 5.0})
    x = np.array([0.0, 0.5])
    f3 = far_field(u, K, 0, x)
    d = direct_apply(u, K, x)
    np.testing.assert_allclose(f3.value, d.value, atol=1e-8)


def test_limit_driver_converges_for_bump():
    rep = limit_driver(builtin("bump"), frac(0.5), 0, R_schedule=(4, 8, 16))
    assert rep.converged and rep.residuals[-1] <= 1e-12
    np.testing.assert_allclose(rep.f_limit, rep.fR_values[-1], atol=1e-12)


def test_limit_driver_linear_growth_up_to_affine():
    K = frac(0.75)
    rep = limit_driver(resolve_function("x"), K, 2, R_schedule=(8, 16, 32, 64, 128, 256, 512), tol=1e-5)
    assert rep.converged
    assert rep.uniform_distance[-1] < rep.uniform_distance[0]
    # A x = 0 by symmetry, so the limit itself is affine on the grid
    _, res = best_poly_fit((rep.grid, rep.f_limit), 1, 1)
    assert res < 1e-6
    lines = rep.to_csv().splitlines()
    assert lines[0].startswith("x1,R=8") and len(lines) == 34


def test_limit_driver_reports_nonconvergence():
    rep = limit_driver(builtin("counterexample_uk", {"k": 10}), frac(0.5), 1, R_schedule=(16, 32, 64, 128))
    assert not rep.converged
    assert any("no convergence" in d for d in rep.diagnostics)
