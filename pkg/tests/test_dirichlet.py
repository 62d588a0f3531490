"""Collocation Dirichlet solver, solution families and the generalized problem."""

from __future__ import annotations

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from nlop import dirichlet
from nlop.dirichlet import (
    DirichletError,
    assemble_matrix,
    graded_nodes,
    solution_family,
    solve_generalized,
    solve_standard,
)
from nlop.exprfunc import builtin, resolve_function
from nlop.kernels import KernelSpec, build
from nlop.operator import HypothesisError

HALF = build(KernelSpec("frac_lap", s=0.5, normalized=True))


def getoor_error(sol, s=0.5):
    xi = sol.interior
    return float(np.max(np.abs(sol.values[1:-1] - (1 - xi**2) ** s)))


def test_graded_nodes():
    x = graded_nodes(10)
    assert x.size == 12 and x[0] == -1.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)
    np.testing.assert_allclose(x, -x[::-1], atol=1e-15)
    h = np.diff(x)
    assert h[0] < h[len(h) // 2]
    with pytest.raises(ValueError):
        graded_nodes(2)


@pytest.mark.skipif(dirichlet._core_c is None, reason="compiled core not built")
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("correction", [True, False])
def test_backends_agree(s, correction):
    x = graded_nodes(37)
    A = assemble_matrix(x, s, correction, backend="python")
    B = assemble_matrix(x, s, correction, backend="cython")
    assert A.shape == (37, 39)
    assert np.max(np.abs(A - B)) <= 1e-11 * np.max(np.abs(A))


def test_unknown_backend():
    with pytest.raises(ValueError):
        assemble_matrix(graded_nodes(5), 0.5, backend="fortran")


def test_getoor_converges():
    errs = [getoor_error(solve_standard(HALF, 1.0, None, N, verify=False)) for N in (20, 40, 80)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 5e-3


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_getoor_other_orders(s):
    K = build(KernelSpec("frac_lap", s=s, normalized=True))
    c = 4**s * math.gamma(1 + s) * math.gamma(0.5 + s) / math.gamma(0.5)
    sol = solve_standard(K, c, None, 80, verify=False)
    assert getoor_error(sol, s) < 3e-2


def test_unnormalized_kernel_scales_right_side():
    sol = solve_standard(build(KernelSpec("frac_lap", s=0.5)), math.pi, None, 40, verify=False)
    assert getoor_error(sol) < 5e-3


def test_constant_exterior_data_gives_constant():
    sol = solve_standard(HALF, 0.0, builtin("constant", {"c": 2.0}), 40)
    np.testing.assert_allclose(sol.values, 2.0, atol=1e-6)
    assert sol.residual < 1e-6


def test_residual_is_checked():
    sol = solve_standard(HALF, 1.0, None, 40)
    assert sol.residual < 5e-2 and sol.residual_points.size == 9
    with pytest.raises(DirichletError):
        solve_standard(HALF, 1.0, None, 10, residual_tol=1e-12)


def test_refuses_non_power_kernels():
    for spec in (KernelSpec("gauss"), KernelSpec("frac_lap", s=0.5, eps=0.1),
                 KernelSpec("frac_lap_comparable", s=0.5, lam=1.0, Lam=2.0), KernelSpec("frac_lap", dim=2, s=0.5)):
        with pytest.raises(HypothesisError):
            solve_standard(build(spec), 1.0, None, 10)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_solution_family_size_and_independence(m):
    fam, gram = solution_family(HALF, m, 40)
    assert len(fam) == m and gram.shape == (m, m)
    if m:
        assert np.linalg.det(gram) > 1e-8
        np.testing.assert_allclose(np.diag(gram), 1.0)


def test_solution_family_member_solves_monomial_problem():
    fam, _ = solution_family(HALF, 2, 40, verify=True)
    assert fam[1].residual < 5e-2


def test_csv_and_dict_outputs():
    sol = solve_standard(HALF, 1.0, None, 10, verify=False)
    lines = sol.to_csv().splitlines()
    assert lines[0] == "node,value" and len(lines) == 13
    assert sol.to_dict()["backend"] in ("python", "cython")


def test_generalized_problem_small_grid():
    K = build(KernelSpec("frac_lap", s=0.75))
    sol = solve_generalized(K, 0.0, resolve_function("x"), 2, 80, verify_schedule=(4, 8, 16, 32), with_family=False)
    assert sol.limit_residual < 5e-3
    # u0 = x outside; inside, u is close to x by symmetry of the problem
    np.testing.assert_allclose(sol.values, sol.nodes, atol=0.05)


def test_generalized_refuses_inadmissible_data():
    K = build(KernelSpec("frac_lap", s=0.25))
    with pytest.raises(HypothesisError):
        solve_generalized(K, 0.0, resolve_function("x"), 0, 20)


def test_pure_python_fallback_switch():
    code = "from nlop import dirichlet; print(dirichlet.BACKEND)"
    env = dict(os.environ, NLOP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "python"
    sol = solve_standard(HALF, 1.0, None, 40, verify=False, backend="python")
    assert sol.backend == "python" and getoor_error(sol) < 5e-3
