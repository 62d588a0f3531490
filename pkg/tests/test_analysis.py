"""Closed-form families, stability probes and polynomial recovery."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from nlop.analysis import (
    CounterexampleCase,
    counterexample_applied,
    counterexample_fk,
    counterexample_truncated,
    logramp_bounds,
    logramp_fk,
    poly_difference_recovery,
    stability_probe,
)
from nlop.exprfunc import builtin
from nlop.kernels import KernelSpec, build
from nlop.operator import default_grid, direct_apply

K = build(KernelSpec("frac_lap", s=0.5))


@pytest.mark.parametrize("k, R, x", [(10, 100, 0.3), (50, 1000, -0.7), (5, 6, 0.0)])
def test_truncated_closed_form_matches_scipy(k, R, x):
    ref = quad(lambda y: k * y / (y - x) ** 2, k, R, epsabs=0, epsrel=1e-13)[0]
    assert counterexample_truncated(k, R, x) == pytest.approx(ref, rel=1e-12)
    assert counterexample_applied(k, R, x) == pytest.approx(-ref, rel=1e-12)


def test_fk_tends_to_two_x():
    g = default_grid(1)[:, 0]
    for k in (5, 10, 100, 1000):
        assert np.max(np.abs(counterexample_fk(k, g) - 2 * g)) <= 6 / (k - 1)
    assert counterexample_fk(10, 0.0) == 0.0


def test_truncation_differences_are_constant_in_x():
    # A(chi_R u_k) + f_k depends on x only through terms that vanish as R grows
    g = np.linspace(-0.9, 0.9, 7)
    d = counterexample_truncated(10, 1e8, g) - counterexample_fk(10, g)
    assert np.ptp(d) < 1e-6


def test_logramp_closed_form_and_bounds():
    for k, x in ((10, 0.5), (100, -0.9), (1000, 0.0)):
        ref = quad(lambda y: y / (y - x) ** 2, k, k * k, epsabs=0, epsrel=1e-13, limit=200)[0] / math.log(k)
        assert logramp_fk(k, x) == pytest.approx(ref, rel=1e-10)
    g = default_grid(1)[:, 0]
    lo, hi = logramp_bounds(1e4)
    vals = logramp_fk(1e4, g)
    assert np.all((lo <= vals) & (vals <= hi))
    assert np.max(np.abs(vals - 1)) < 5e-3


def test_logramp_matches_quadrature_of_operator():
    x = np.array([-0.5, 0.0, 0.5])
    for k in (10, 100):
        res = direct_apply(builtin("logramp_uk", {"k": k}), K, x)
        np.testing.assert_allclose(res.value, logramp_fk(k, x), rtol=1e-8)


def test_validation():
    with pytest.raises(ValueError):
        CounterexampleCase(10, 5, 0.0)
    with pytest.raises(ValueError):
        CounterexampleCase(10, 100, 1.0)
    with pytest.raises(ValueError):
        counterexample_fk(1, 0.0)
    with pytest.raises(ValueError):
        logramp_fk(10, np.array([0.0, -1.0]))


def test_stability_probe_logramp_family():
    seq = [builtin("logramp_uk", {"k": k}) for k in (10, 100, 1000)]
    rep = stability_probe(seq, builtin("constant", {"c": 0.0}), K, 0, labels=["10", "100", "1000"])
    assert min(rep.far_field) >= 0.5 and not rep.far_field_holds
    assert not rep.conclusion_holds
    assert rep.gap[-1] == pytest.approx(1.0, abs=1e-3)
    assert rep.near_sup == [0.0, 0.0, 0.0]
    out = rep.to_dict()
    assert out["labels"] == ["10", "100", "1000"]


def test_stability_probe_ramp_family_far_field_diverges():
    seq = [builtin("counterexample_uk", {"k": k}) for k in (10, 100)]
    rep = stability_probe(seq, builtin("constant", {"c": 0.0}), K, 1, labels=["10", "100"])
    assert rep.far_field == [math.inf, math.inf]
    assert all("diverges" in note for note in rep.notes)
    # modulo constants the limit is -f_k
    g = rep.grid[:, 0]
    assert np.ptp(rep.f_seq[-1] + counterexample_fk(100, g)) < 1e-8
    assert "inf" in str(rep.to_dict()["far_field"])


def test_poly_difference_recovery():
    g = np.linspace(-0.9, 0.9, 11)
    f1 = np.sin(g)
    ok = poly_difference_recovery(f1, f1 + 2 - 3 * g, g, 1, 2)
    assert ok.passed and ok.polynomial.coefficient_vector() == pytest.approx([2, -3])
    bad = poly_difference_recovery(f1, f1 + g**2, g, 1, 2)
    assert not bad.passed and bad.to_dict()["status"] == "FAIL"
    with pytest.raises(ValueError):
        poly_difference_recovery(f1, f1[:3], g, 1, 1)
