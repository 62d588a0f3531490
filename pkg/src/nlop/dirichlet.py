"""Dirichlet problems on (-1, 1) for power kernels c |x - y|^(-1-2s).

``solve_standard`` is a collocation solver: u is piecewise linear on graded
nodes (plus a quadratic correction in the quadrature), equal to the exterior
data g outside (-1, 1). ``solve_generalized`` handles exterior data with
polynomial growth by splitting off the far part u1 = chi_{|y|>=4} u0, whose
operator value f_{u1} is a pure far-field integral, and solving a standard
problem for the rest. ``solution_family`` returns the solutions with
A u_P = x^alpha and zero exterior data, one per monomial of degree <= m-1.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import _core_py
from .exprfunc import ScalarField, check_membership
from .kernels import Kernel
from .multiindex import best_poly_fit, enumerate_multi_indices, monomial, solution_space_dim
from .operator import HypothesisError, default_grid, direct_apply, far_field, limit_driver
from .quadrature import Annulus, QuadConfig, integrate_region, integrate_tail

try:  # compiled assembly, built from _core.pyx when available
    from . import _core as _core_c
except ImportError:  # pragma: no cover - depends on the build
    _core_c = None

__all__ = [
    "BACKEND",
    "DirichletError",
    "DirichletProblem",
    "DirichletSolution",
    "assemble_matrix",
    "gram_matrix",
    "graded_nodes",
    "solution_family",
    "solve_generalized",
    "solve_standard",
]

BACKEND = "cython" if _core_c is not None and os.environ.get("NLOP_PURE_PYTHON") != "1" else "python"


class DirichletError(RuntimeError):
    """The collocation system could not be solved to the requested tolerance."""


def graded_nodes(N: int, grading: float = 2.0) -> np.ndarray:
    """N interior nodes plus the endpoints -1, 1, clustered toward the boundary.

    x = sign(t) (1 - (1 - |t|)^grading) for t uniform in [-1, 1]; grading 2
    matches the square-root boundary layer of (1 - x^2)^s at s = 1/2.
    """
    if N < 3:
        raise ValueError("need at least 3 interior nodes")
    t = np.linspace(-1.0, 1.0, N + 2)
    x = np.sign(t) * (1.0 - (1.0 - np.abs(t)) ** grading)
    x[0], x[-1] = -1.0, 1.0
    return x


def assemble_matrix(x: np.ndarray, s: float, correction: bool = True, backend: str | None = None) -> np.ndarray:
    """Collocation matrix (N, N+2) for the kernel |z|^(-1-2s) on nodes ``x`` (endpoints included)."""
    backend = backend or BACKEND
    x = np.ascontiguousarray(x, dtype=float)
    if backend == "cython":
        if _core_c is None:
            raise RuntimeError("compiled core not available")
        return np.asarray(_core_c.assemble(x, float(s), bool(correction)))
    if backend != "python":
        raise ValueError(f"unknown backend {backend!r}")
    return _core_py.assemble(x, float(s), correction)


def _power_kernel(K: Kernel) -> tuple[float, float]:
    """(c, s) with K(x, y) = c |x - y|^(-1-2s); refuses other kernels."""
    spec = K.spec
    if K.dim != 1:
        raise HypothesisError("the Dirichlet solver is one-dimensional")
    if spec is None or not spec.name.startswith("frac_lap"):
        raise HypothesisError("the Dirichlet solver needs a frac_lap kernel")
    if spec.name == "frac_lap_comparable" and spec.Lam != spec.lam:
        raise HypothesisError("the Dirichlet solver needs lambda == Lambda (a pure power kernel)")
    if spec.eps is not None:
        raise HypothesisError("desingularized kernels are not pure powers")
    c = float(K.profile(np.array([1.0])))
    if not c > 0:
        raise HypothesisError("kernel constant must be positive")
    return c, spec.s


def _as_nodes(grid) -> np.ndarray:
    if grid is None:
        return graded_nodes(160)
    if isinstance(grid, (int, np.integer)):
        return graded_nodes(int(grid))
    x = np.asarray(grid, dtype=float).ravel()
    if x[0] != -1.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
        raise ValueError("node array must increase strictly from -1 to 1")
    return x


@dataclass
class DirichletProblem:
    """A u = f in (-1, 1), u = g outside; ``m`` only matters for the generalized problem."""

    K: Kernel
    f: ScalarField
    g: ScalarField | None = None
    m: int = 0
    grid: int | np.ndarray = 160


@dataclass
class DirichletSolution:
    nodes: np.ndarray
    values: np.ndarray
    extension: ScalarField
    residual: float
    residual_points: np.ndarray
    backend: str
    family_basis: list["DirichletSolution"] = field(default_factory=list)
    gram: np.ndarray | None = None
    limit_residual: float | None = None
    family_residuals: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    def to_dict(self) -> dict:
        out = {
            "nodes": self.nodes.tolist(),
            "values": self.values.tolist(),
            "residual": self.residual,
            "residual_points": self.residual_points.tolist(),
            "backend": self.backend,
            "limit_residual": self.limit_residual,
            "family_residuals": list(self.family_residuals),
            "family_size": len(self.family_basis),
            "notes": list(self.notes),
        }
        if self.gram is not None:
            out["gram"] = self.gram.tolist()
            out["gram_det"] = float(np.linalg.det(self.gram)) if self.gram.size else 1.0
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["node", "value"] + [f"family_{j}" for j in range(len(self.family_basis))]
        w.writerow(cols)
        for i, (x, v) in enumerate(zip(self.nodes, self.values)):
            w.writerow([repr(float(x)), repr(float(v))]
                       + [repr(float(fb.values[i])) for fb in self.family_basis])
        return buf.getvalue()


# ---------------------------------------------------------------------------


def _exterior_load(g: ScalarField | None, K: Kernel, xi: np.ndarray, cfg: QuadConfig) -> np.ndarray:
    """int_{|y|>1} g(y) K(x_i, y) dy for all interior nodes."""
    if g is None or (g.support_radius is not None and g.support_radius <= 1):
        return np.zeros(xi.size)

    def f(y):
        return g(y)[:, None] * K(xi[None, :, None], y[:, None, :])
    gap = max(1.0 - float(np.max(np.abs(xi))), 1e-12)
    layers = [1.0 + gap * 2.0 ** j for j in range(0, 60) if gap * 2.0 ** j < 1.0]
    breaks = sorted({abs(b) for b in g.breakpoints if abs(b) > 1} | set(layers))
    if g.support_radius is not None:
        res = integrate_region(f, Annulus((0.0,), 1.0, g.support_radius), cfg,
                               radial_breaks=[b for b in breaks if b < g.support_radius])
    else:
        growth = g.tail_growth()
        res = integrate_tail(f, 1.0, max(growth, 0.0), K.tail_decay, cfg, n=1, radial_breaks=breaks)
    return np.atleast_1d(res.value)


def _extension(x: np.ndarray, vals: np.ndarray, outside: ScalarField | None, name: str) -> ScalarField:
    spline = CubicSpline(x, vals)
    out_f = outside.func if outside is not None else None

    def func(p):
        t = p[:, 0]
        res = np.zeros(t.size)
        inside = np.abs(t) < 1
        res[inside] = spline(t[inside])
        if out_f is not None and np.any(~inside):
            res[~inside] = out_f(p[~inside])
        return res

    if outside is None:
        support, growth, bps = 1.0, None, (-1.0, 1.0)
    else:
        support = outside.support_radius if outside.support_radius is None else max(outside.support_radius, 1.0)
        growth = outside.growth_exponent
        bps = tuple(sorted({-1.0, 1.0, *outside.breakpoints}))
    return ScalarField(1, func, None, 2.0, growth, support, bps, name)


def _solve_nodes(K: Kernel, x: np.ndarray, rhs_f: np.ndarray, g: ScalarField | None, cfg: QuadConfig,
                 backend: str | None) -> np.ndarray:
    c, s = _power_kernel(K)
    M = assemble_matrix(x, s, backend=backend)
    gb = np.zeros(2) if g is None else np.atleast_1d(g(np.array([[-1.0], [1.0]])))
    rhs = rhs_f / c + _exterior_load(g, K, x[1:-1], cfg) / c - M[:, 0] * gb[0] - M[:, -1] * gb[1]
    try:
        u = np.linalg.solve(M[:, 1:-1], rhs)
    except np.linalg.LinAlgError as exc:
        raise DirichletError(f"singular collocation system: {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise DirichletError("collocation solve produced non-finite values")
    return np.concatenate([[gb[0]], u, [gb[1]]])


def _values(f, pts: np.ndarray) -> np.ndarray:
    if isinstance(f, ScalarField):
        return np.atleast_1d(f(pts[:, None]))
    if callable(f):
        return np.asarray(f(pts), dtype=float)
    return np.broadcast_to(np.asarray(f, dtype=float), pts.shape).copy()


def _check_points(x: np.ndarray, count: int = 9) -> np.ndarray:
    interior = x[1:-1]
    mids = 0.5 * (interior[:-1] + interior[1:])
    mids = mids[np.abs(mids) <= 0.9]
    idx = np.linspace(0, mids.size - 1, min(count, mids.size)).round().astype(int)
    return mids[idx]


def solve_standard(K: Kernel, f: ScalarField | Callable | float, g: ScalarField | None = None, grid=None,
                   cfg: QuadConfig | None = None, *, backend: str | None = None, verify: bool = True,
                   residual_tol: float | None = None) -> DirichletSolution:
    """Collocation solve of A u = f in (-1, 1) with u = g outside.

    ``grid`` is a node count (graded nodes) or an explicit node array with
    endpoints. When ``verify`` is set, |A u - f| is evaluated by direct
    quadrature of the spline extension at up to nine off-node points.
    """
    cfg = cfg or QuadConfig()
    x = _as_nodes(grid)
    u = _solve_nodes(K, x, _values(f, x[1:-1]), g, cfg, backend)
    ext = _extension(x, u, g, "dirichlet_solution")
    pts = _check_points(x) if verify else np.zeros(0)
    residual = math.nan
    if verify and pts.size:
        Au = np.atleast_1d(direct_apply(ext, K, pts, cfg=cfg).value)
        residual = float(np.max(np.abs(Au - _values(f, pts))))
        if residual_tol is not None and residual > residual_tol:
            raise DirichletError(f"residual {residual:.3e} above tolerance {residual_tol:.3e}")
    return DirichletSolution(x, u, ext, residual, pts, backend or BACKEND)


def solution_family(K: Kernel, m: int, grid=None, cfg: QuadConfig | None = None, *, backend: str | None = None,
                    verify: bool = False) -> tuple[list[DirichletSolution], np.ndarray]:
    """Solutions of A u_P = x^alpha, |alpha| <= m-1, zero outside; returns them and their Gram matrix."""
    cfg = cfg or QuadConfig()
    if K.dim != 1:
        raise HypothesisError("the Dirichlet solver is one-dimensional")
    fam = []
    for alpha in enumerate_multi_indices(1, m - 1):
        fam.append(solve_standard(K, lambda t, a=alpha: np.atleast_1d(monomial(a, t[:, None])), None, grid, cfg,
                                  backend=backend, verify=verify))
    if len(fam) != solution_space_dim(1, m):
        raise DirichletError("family size does not match the dimension count")
    return fam, gram_matrix(fam)


def gram_matrix(solutions: list[DirichletSolution]) -> np.ndarray:
    """Gram matrix of the unit-normalised trapezoidal L2 inner products of nodal values."""
    if not solutions:
        return np.zeros((0, 0))
    x = solutions[0].nodes
    w = np.zeros(x.size)
    h = np.diff(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    V = np.array([sol.values for sol in solutions])
    norms = np.sqrt(np.einsum("ij,j,ij->i", V, w, V))
    if np.any(norms == 0):
        raise DirichletError("a family member vanishes identically")
    V = V / norms[:, None]
    return (V * w) @ V.T


def _fit_residual(values: np.ndarray, grid: np.ndarray, m: int) -> float:
    if m == 0:
        return float(np.max(np.abs(values)))
    return best_poly_fit((grid, values), 1, m - 1)[1]


def solve_generalized(K: Kernel, f: ScalarField | Callable | float, u0: ScalarField, m: int, grid=None,
                      cfg: QuadConfig | None = None, *, backend: str | None = None,
                      verify_schedule=(4, 8, 16, 32, 64), with_family: bool = True) -> DirichletSolution:
    """Solve A u = f in (-1, 1) up to polynomials of degree m-1, with u = u0 outside.

    u1 = u0 on |y| >= 4 and zero inside, so f_{u1} = int_{|y|>3} u1 psi.
    The standard problem for u~ uses right side f - f_{u1} and exterior data
    u0 on 1 <= |y| < 4; the answer is u = u1 + u~. The result is checked by
    :func:`limit_driver` on the default grid: ``limit_residual`` is the sup of
    f_u - f after removing the best polynomial of degree m-1. With
    ``with_family`` the family solutions are attached and the same check is
    repeated for u + u_P.
    """
    cfg = cfg or QuadConfig()
    c, _ = _power_kernel(K)
    report = check_membership(u0, K, m, cfg=cfg)
    if not report.passed:
        raise HypothesisError(f"exterior data not admissible for m={m}: {'; '.join(report.diagnostics)}")
    x = _as_nodes(grid)
    u1 = u0.restrict(4.0, math.inf, name="far_data")
    g_near = u0.restrict(1.0, 4.0, name="near_data")
    f_u1 = np.atleast_1d(far_field(u1, K, m, x[1:-1, None], cfg).value)
    vals = _solve_nodes(K, x, _values(f, x[1:-1]) - f_u1, g_near, cfg, backend)
    ext = _extension(x, vals, u0, "generalized_solution")
    sol = DirichletSolution(x, vals, ext, math.nan, np.zeros(0), backend or BACKEND)
    if verify_schedule:
        X = default_grid(1)
        target = _values(f, X[:, 0])
        rep = limit_driver(ext, K, m, X, verify_schedule, cfg)
        sol.limit_residual = _fit_residual(rep.f_limit - target, X, m)
        sol.residual = sol.limit_residual
        sol.residual_points = X[:, 0]
        if with_family and m > 0:
            fam, gram = solution_family(K, m, x, cfg, backend=backend)
            sol.family_basis, sol.gram = fam, gram
            for member in fam:
                combo = ext + member.extension
                combo = combo.with_meta(growth_exponent=ext.growth_exponent, support_radius=ext.support_radius)
                rep_c = limit_driver(combo, K, m, X, verify_schedule, cfg)
                sol.family_residuals.append(_fit_residual(rep_c.f_limit - target, X, m))
    return sol
