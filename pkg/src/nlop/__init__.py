"""Nonlocal integral operators acting on functions with polynomial growth.

The operator Au(x) = P.V. int (u(x) - u(y)) K(x, y) dy is evaluated on
truncations A(chi_R u) and split into an R-independent part plus a
polynomial of degree m-1. Letting R -> infinity gives A u "up to
polynomials". Modules:

* ``multiindex``: multi-indices, polynomials, least-squares polynomial fits
* ``kernels``: the kernel catalog, analytic x-derivatives, hypothesis checks
* ``exprfunc``: expression parser and function catalog
* ``quadrature``: adaptive Gauss-Kronrod, certified tails, principal values
* ``operator``: decomposition, direct evaluation, the R -> infinity driver
* ``analysis``: closed-form families and stability probes
* ``dirichlet``: 1D collocation solver and the generalized problem
* ``viscosity``: touching-test checks
"""

from __future__ import annotations

__version__ = "0.1.0"

from .exprfunc import ScalarField, builtin, compile_expr, resolve_function  # noqa: E402
from .kernels import Kernel, KernelSpec, build  # noqa: E402
from .multiindex import MultiIndex, Polynomial, best_poly_fit, solution_space_dim  # noqa: E402
from .operator import CutoffSpec, decompose, direct_apply, limit_driver, tail_bound  # noqa: E402
from .quadrature import QuadConfig, QuadResult  # noqa: E402

__all__ = [
    "CutoffSpec",
    "Kernel",
    "KernelSpec",
    "MultiIndex",
    "Polynomial",
    "QuadConfig",
    "QuadResult",
    "ScalarField",
    "__version__",
    "best_poly_fit",
    "build",
    "builtin",
    "compile_expr",
    "decompose",
    "direct_apply",
    "limit_driver",
    "resolve_function",
    "solution_space_dim",
    "tail_bound",
]
