"""The operator Au(x) = P.V. int (u(x) - u(y)) K(x, y) dy for functions with polynomial growth.

For a cut-off tau equal to one on B_3 and x in B_1,

    A(tau u)(x) = P(x) + f1(x) + f2(x) + f*(x)

with f1 the principal value over B_3, f2 = u(x) int_{|y|>3} K(x, y) dy,
f* = int_{|y|>3} tau u psi(x, y) dy and P(x) = -sum_{|alpha|<=m-1} theta_alpha x^alpha,
theta_alpha = int_{|y|>3} tau u d^alpha_x K(0, y) / alpha! dy. The remainder
kernel psi is the integral form of the order-m Taylor remainder of
x -> K(x, y) at x = 0, so that K(x, y) = sum_{|alpha|<m} d^alpha K(0, y) x^alpha / alpha! - psi(x, y).
Only P depends badly on the cut-off radius; that is the part quotiented out
when the operator is taken "up to a polynomial".
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .exprfunc import ScalarField
from .kernels import Kernel
from .multiindex import (DegenerateSampleError, MultiIndex, Polynomial, best_poly_fit, enumerate_multi_indices,
                         factorial, monomial)
from .quadrature import (Annulus, DivergentIntegralError, QuadConfig, QuadResult, geometric_breaks, gk_interval,
                         gk_rectangle, integrate_region, integrate_tail, integrate_unit_interval_weighted, jacobi_rule,
                         pv_second_difference)

__all__ = [
    "CutoffSpec",
    "Decomposition",
    "HypothesisError",
    "LimitReport",
    "decompose",
    "default_grid",
    "direct_apply",
    "far_field",
    "limit_driver",
    "psi",
    "psi_matrix",
    "theta_coeffs",
    "tail_bound",
]

PSI_NODES = 16
PV_RADIUS = 0.5


class HypothesisError(ValueError):
    """Inputs violate an assumption needed by the computation."""


# ---------------------------------------------------------------------------
# cut-offs


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    out = np.zeros_like(t)
    inner = (t > 0) & (t < 1)
    a = np.exp(-1.0 / t[inner])
    b = np.exp(-1.0 / (1.0 - t[inner]))
    out[inner] = a / (a + b)
    out[t >= 1] = 1.0
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Cut-off tau: ``sharp`` is the indicator of B_R, ``smooth`` falls from 1 to 0 on ``R - width < |y| < R``."""

    kind: str = "sharp"
    R: float = 8.0
    width: float | None = None

    def __post_init__(self):
        if self.kind not in ("sharp", "smooth"):
            raise ValueError(f"unknown cut-off kind {self.kind!r}")
        if not self.R > 3:
            raise ValueError("cut-off radius must exceed 3")
        if self.kind == "smooth":
            w = self.width if self.width is not None else 0.5 * (self.R - 3)
            if not (w > 0 and self.R - w >= 3):
                raise ValueError("smooth cut-off needs 0 < width <= R - 3")
            object.__setattr__(self, "width", float(w))

    @classmethod
    def parse(cls, text: str) -> "CutoffSpec":
        """``sharp:R`` or ``smooth:R,w``."""
        kind, _, rest = text.partition(":")
        if not rest:
            raise ValueError(f"cut-off must look like sharp:R or smooth:R,w, got {text!r}")
        parts = [float(p) for p in rest.split(",")]
        if kind == "sharp" and len(parts) == 1:
            return cls("sharp", parts[0])
        if kind == "smooth" and len(parts) in (1, 2):
            return cls("smooth", parts[0], parts[1] if len(parts) == 2 else None)
        raise ValueError(f"cannot parse cut-off {text!r}")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(pts, dtype=float), axis=-1)
        if self.kind == "sharp":
            return (r < self.R).astype(float)
        return 1.0 - _smooth_step((r - (self.R - self.width)) / self.width)

    def radii(self) -> list[float]:
        return [self.R] if self.kind == "sharp" else [self.R - self.width, self.R]

    def apply(self, u: ScalarField) -> ScalarField:
        bps = []
        for rad in self.radii():
            bps.extend([rad, -rad] if u.dim == 1 else [rad])
        return u.times(self, support_radius=self.R, breakpoints=bps, name=f"tau*{u.name}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "R": self.R, "width": self.width}


# ---------------------------------------------------------------------------
# grid helpers


def default_grid(n: int) -> np.ndarray:
    """33 uniform interior points of (-1, 1), or 13 radii x 13 angles in the unit disc."""
    if n == 1:
        return np.linspace(-1, 1, 35)[1:-1, None]
    radii = np.arange(1, 14) / 14
    ang = 2 * np.pi * np.arange(13) / 13
    rr, aa = np.meshgrid(radii, ang, indexing="ij")
    return np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)


def _grid(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n == 1:
        x = x.reshape(-1, 1)
    else:
        x = x.reshape(-1, n)
    if np.any(np.linalg.norm(x, axis=1) >= 1):
        raise HypothesisError("evaluation points must lie in the open unit ball")
    return x


def _radial_breaks(u: ScalarField, lo: float, hi: float, extra=()) -> list[float]:
    cand = [abs(b) for b in u.breakpoints] + list(extra)
    return sorted({c for c in cand if lo < c < hi})


def _smooth_radius(u: ScalarField, x: np.ndarray, cap: float) -> float:
    """Radius of a ball around x free of u's breakpoints (those at x itself are harmless)."""
    d = cap
    if u.dim == 1:
        for b in u.breakpoints:
            dist = abs(b - x[0])
            if dist > 1e-12:
                d = min(d, dist)
    else:
        r = float(np.linalg.norm(x))
        for b in u.breakpoints:
            dist = abs(b - r)
            if dist > 1e-12:
                d = min(d, dist)
    return max(d, 1e-6)


# ---------------------------------------------------------------------------
# regions away from the diagonal


def _geom_around(c: float, d0: float, L: float) -> list[float]:
    out = []
    r = 2 * d0
    while r < L:
        out.extend([c - r, c + r])
        r *= 2
    return out


def _outer_1d(v: ScalarField, K: Kernel, x: float, vx: float, delta: float, lo: float, hi: float,
              cfg: QuadConfig, extra_breaks=()) -> QuadResult:
    """int over [lo, x-delta] and [x+delta, hi] of (vx - v(y)) K(x, y)."""
    def g(y):
        return (vx - v(y[:, None])) * K(np.full((y.size, 1), x), y[:, None])
    bps = list(v.breakpoints) + list(extra_breaks) + _geom_around(x, delta, max(hi - x, x - lo))
    left = gk_interval(g, lo, x - delta, cfg, breakpoints=bps) if lo < x - delta else QuadResult.zero()
    right = gk_interval(g, x + delta, hi, cfg, breakpoints=bps) if x + delta < hi else QuadResult.zero()
    return left + right


def _outer_b3_2d(u: ScalarField, K: Kernel, x: np.ndarray, ux: float, delta: float, cfg: QuadConfig) -> QuadResult:
    """int over B_3 minus B_delta(x) of (u(x) - u(y)) K(x, y), in polar coordinates about x."""
    def g(p):
        t, phi = p[:, 0], p[:, 1]
        e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        xe = e @ x
        rho_out = -xe + np.sqrt(xe * xe - x @ x + 9.0)
        span = np.log(rho_out / delta)
        rho = delta * np.exp(span * t)
        y = x[None, :] + rho[:, None] * e
        return (ux - u(y)) * K(np.broadcast_to(x, y.shape), y) * rho * rho * span
    return gk_rectangle(g, (0.0, 1.0), (0.0, 2 * math.pi), cfg,
                        xbreaks=[0.25, 0.5, 0.75], ybreaks=[0.5 * math.pi, math.pi, 1.5 * math.pi])


def _annulus_about(v: ScalarField, K: Kernel, x: np.ndarray, vx: float, r0: float, r1: float,
                   cfg: QuadConfig) -> QuadResult:
    """int over r0 < |y - x| < r1 of (v(x) - v(y)) K(x, y) (n = 2)."""
    def f(y):
        return (vx - v(y)) * K(np.broadcast_to(x, y.shape), y)
    return integrate_region(f, Annulus(tuple(x), r0, r1), cfg)


# ---------------------------------------------------------------------------
# f1, f2


def _f1(u: ScalarField, K: Kernel, X: np.ndarray, cfg: QuadConfig) -> QuadResult:
    deltas = np.array([_smooth_radius(u, x, PV_RADIUS) for x in X])
    near = pv_second_difference(u, K, X, deltas, cfg)
    ux = u(X)

    def outer(i):
        x = X[i]
        if K.dim == 1:
            return _outer_1d(u, K, float(x[0]), float(ux[i]), float(deltas[i]), -3.0, 3.0, cfg)
        return _outer_b3_2d(u, K, x, float(ux[i]), float(deltas[i]), cfg)

    parts = ordered_map(outer, range(X.shape[0]))
    return near + _stack(parts)


def _stack(parts: list[QuadResult]) -> QuadResult:
    return QuadResult(np.array([p.value for p in parts], dtype=float),
                      np.array([p.err_est for p in parts], dtype=float),
                      sum(p.evaluations for p in parts), all(p.converged for p in parts),
                      "; ".join(sorted({p.diagnostic for p in parts if p.diagnostic})))


def _kernel_tail_mass(K: Kernel, X: np.ndarray, cfg: QuadConfig) -> QuadResult:
    """int_{|y|>3} K(x, y) dy for every grid point."""
    def f(y):
        return K(X[None, :, :], y[:, None, :])
    return integrate_tail(f, 3.0, 0.0, K.tail_decay, cfg, n=K.dim)


def _f2(u: ScalarField, K: Kernel, X: np.ndarray, cfg: QuadConfig) -> QuadResult:
    return _kernel_tail_mass(K, X, cfg).scale(u(X))


# ---------------------------------------------------------------------------
# psi and theta


def psi_matrix(K: Kernel, m: int, X: np.ndarray, Y: np.ndarray, nodes: int = PSI_NODES) -> np.ndarray:
    """psi(x_j, y_p) as an array of shape (P, X), using a fixed Gauss-Jacobi rule in t."""
    if m == 0:
        return -K(X[None, :, :], Y[:, None, :])
    t, w = jacobi_rule(m, nodes)
    out = np.zeros((Y.shape[0], X.shape[0]))
    for alpha in enumerate_multi_indices(K.dim, m)[-_count_order(K.dim, m):]:
        z = t[:, None, None, None] * X[None, None, :, :] - Y[None, :, None, :]
        d = K.deriv_profile(alpha, z)
        integral = np.tensordot(w, d, axes=(0, 0))
        coef = m / factorial(alpha) * np.atleast_1d(monomial(alpha, X))
        out -= integral * coef[None, :]
    return out


def _count_order(n: int, m: int) -> int:
    return math.comb(m + n - 1, n - 1)


def psi(K: Kernel, m: int, x, y, cfg: QuadConfig | None = None) -> float:
    """psi(x, y) with the t-integral computed adaptively (doubling Gauss-Jacobi rules)."""
    cfg = cfg or QuadConfig()
    if m > K.max_taylor_order:
        raise HypothesisError(f"m={m} exceeds max_taylor_order={K.max_taylor_order}")
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(K.dim)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(K.dim)
    if m == 0:
        return -float(K(x, y))
    total = 0.0
    for alpha in enumerate_multi_indices(K.dim, m)[-_count_order(K.dim, m):]:
        xa = monomial(alpha, x)
        if xa == 0:
            continue
        res = integrate_unit_interval_weighted(lambda t: K.deriv_profile(alpha, t[:, None] * x[None, :] - y[None, :]),
                                               m, cfg)
        total -= m * xa / factorial(alpha) * float(res.value)
    return total


def _tau_field(u: ScalarField, tau: CutoffSpec | None) -> ScalarField:
    return u if tau is None else tau.apply(u)


def _outer_radius(v: ScalarField, tau: CutoffSpec | None) -> float | None:
    if tau is not None:
        return tau.R
    return v.support_radius


def _annulus_integral(integrand, v: ScalarField, n: int, r0: float, r1: float, cfg: QuadConfig,
                      extra=()) -> QuadResult:
    if r1 <= r0:
        return None
    breaks = _radial_breaks(v, r0, r1, extra)
    return integrate_region(integrand, Annulus(tuple(np.zeros(n)), r0, r1), cfg, radial_breaks=breaks)


def _theta_integrand(v: ScalarField, K: Kernel, alphas: list[MultiIndex]):
    zero = np.zeros((1, K.dim))
    facts = np.array([factorial(a) for a in alphas], dtype=float)

    def f(y):
        vy = v(y)
        cols = [K.deriv_profile(a, zero - y) for a in alphas]
        return vy[:, None] * np.stack(cols, axis=1) / facts[None, :]
    return f


def theta_coeffs(u: ScalarField, K: Kernel, tau: CutoffSpec, m: int, cfg: QuadConfig | None = None
                 ) -> tuple[dict[MultiIndex, float], dict[MultiIndex, float]]:
    """theta_alpha for |alpha| <= m-1 and their error estimates."""
    cfg = cfg or QuadConfig()
    alphas = enumerate_multi_indices(K.dim, m - 1)
    if not alphas:
        return {}, {}
    v = tau.apply(u)
    res = _annulus_integral(_theta_integrand(v, K, alphas), v, K.dim, 3.0, tau.R, cfg, tau.radii())
    vals = np.atleast_1d(res.value)
    errs = np.atleast_1d(res.err_est)
    return dict(zip(alphas, vals.tolist())), dict(zip(alphas, errs.tolist()))


def _polynomial_from_theta(theta: dict[MultiIndex, float], n: int, m: int) -> Polynomial:
    return Polynomial(n, m - 1, {a: -c for a, c in theta.items()})


def _fstar_integrand(v: ScalarField, K: Kernel, m: int, X: np.ndarray):
    def f(y):
        return v(y)[:, None] * psi_matrix(K, m, X, y)
    return f


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class Decomposition:
    """The four pieces of A(tau u) at one or more points."""

    x: np.ndarray
    f1: QuadResult
    f2: QuadResult
    fstar: QuadResult
    P: Polynomial
    theta: dict
    theta_err: dict
    m: int
    tau: CutoffSpec

    @property
    def P_values(self) -> np.ndarray:
        return np.atleast_1d(self.P(self.x))

    @property
    def total(self) -> np.ndarray:
        return self.P_values + np.atleast_1d(self.f1.value) + np.atleast_1d(self.f2.value) + np.atleast_1d(
            self.fstar.value)

    @property
    def f_values(self) -> np.ndarray:
        return np.atleast_1d(self.f1.value) + np.atleast_1d(self.f2.value) + np.atleast_1d(self.fstar.value)

    @property
    def err_est(self) -> np.ndarray:
        theta_err = sum(abs(e) for e in self.theta_err.values()) if self.theta_err else 0.0
        return (np.atleast_1d(self.f1.err_est) + np.atleast_1d(self.f2.err_est) + np.atleast_1d(self.fstar.err_est)
                + theta_err)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "m": self.m,
            "tau": self.tau.to_dict(),
            "f1": self.f1.to_dict(),
            "f2": self.f2.to_dict(),
            "fstar": self.fstar.to_dict(),
            "theta": {str(a): v for a, v in sorted(self.theta.items())},
            "P": self.P.to_dict(),
            "P_values": self.P_values.tolist(),
            "total": self.total.tolist(),
            "err_est": self.err_est.tolist(),
        }


def _check_order(K: Kernel, m: int):
    if m < 0:
        raise HypothesisError("m must be >= 0")
    if m > K.max_taylor_order:
        raise HypothesisError(f"m={m} exceeds the kernel's max_taylor_order={K.max_taylor_order}")


def decompose(u: ScalarField, K: Kernel, tau: CutoffSpec, m: int, x, cfg: QuadConfig | None = None,
              *, f12: tuple[QuadResult, QuadResult] | None = None) -> Decomposition:
    """Split A(tau u)(x) into P + f1 + f2 + f* for every point in ``x``."""
    cfg = cfg or QuadConfig()
    _check_order(K, m)
    if u.dim != K.dim:
        raise HypothesisError("function and kernel dimensions differ")
    X = _grid(x, K.dim)
    f1, f2 = f12 if f12 is not None else (_f1(u, K, X, cfg), _f2(u, K, X, cfg))
    theta, theta_err = theta_coeffs(u, K, tau, m, cfg)
    v = tau.apply(u)
    fs = _annulus_integral(_fstar_integrand(v, K, m, X), v, K.dim, 3.0, tau.R, cfg, tau.radii())
    P = _polynomial_from_theta(theta, K.dim, m)
    return Decomposition(X, f1, f2, fs, P, theta, theta_err, m, tau)


def direct_apply(u: ScalarField, K: Kernel, x, tau: CutoffSpec | None = None,
                 cfg: QuadConfig | None = None) -> QuadResult:
    """A(tau u)(x) straight from the definition, without any Taylor expansion.

    Independent of the decomposition: the principal value uses a smaller
    radius, and the rest is integrated on balls centered at x rather than
    at the origin.
    """
    cfg = cfg or QuadConfig()
    n = K.dim
    X = _grid(x, n)
    v = _tau_field(u, tau)
    deltas = np.array([0.6 * _smooth_radius(v, xx, PV_RADIUS) for xx in X])
    near = pv_second_difference(v, K, X, deltas, cfg)
    vX = v(X)
    support = _outer_radius(v, tau)
    extra = tau.radii() if tau is not None else []
    growth = v.tail_growth()

    def outer(i):
        xx = X[i]
        L = support + 2.0 if support is not None else 4.0
        if n == 1:
            mid = _outer_1d(v, K, float(xx[0]), float(vX[i]), float(deltas[i]), float(xx[0]) - L,
                            float(xx[0]) + L, cfg, [e * sgn for e in extra for sgn in (1, -1)])
        else:
            mid = QuadResult.zero()
            edges = [float(deltas[i])] + [r for r in geometric_breaks(float(deltas[i]), L)] + [L]
            for r0, r1 in zip(edges[:-1], edges[1:]):
                mid = mid + _annulus_about(v, K, xx, float(vX[i]), r0, r1, cfg)
        kt = integrate_tail(lambda y: K(np.broadcast_to(xx, y.shape), y), L, 0.0, K.tail_decay, cfg, n=n,
                            center=xx).scale(float(vX[i]))
        total = mid + kt
        if support is None or support > L - 1:
            vt = integrate_tail(lambda y: v(y) * K(np.broadcast_to(xx, y.shape), y), L,
                                0.0 if growth == -math.inf else growth, K.tail_decay, cfg, n=n, center=xx,
                                radial_breaks=[abs(b - xx[0]) for b in v.breakpoints] if n == 1 else ())
            total = total - vt
        return total

    return near + _stack(ordered_map(outer, range(X.shape[0])))


def far_field(u: ScalarField, K: Kernel, m: int, x, cfg: QuadConfig | None = None) -> QuadResult:
    """f3(x) = int_{|y|>3} u(y) psi(x, y) dy, the R-independent limit of f*.

    When u vanishes on B_3 this is the whole limit f_u, since f1 and f2 are zero.
    """
    cfg = cfg or QuadConfig()
    _check_order(K, m)
    X = _grid(x, K.dim)
    integrand = _fstar_integrand(u, K, m, X)
    if u.support_radius is not None:
        if u.support_radius <= 3:
            return QuadResult.zero((X.shape[0],))
        return _annulus_integral(integrand, u, K.dim, 3.0, u.support_radius, cfg)
    growth = u.tail_growth()
    decay = K.deriv_decay(m) if m > 0 else K.tail_decay
    return integrate_tail(integrand, 3.0, max(growth, 0.0), decay, cfg, n=K.dim,
                          radial_breaks=[abs(b) for b in u.breakpoints if abs(b) > 3])


# ---------------------------------------------------------------------------
# tail bound


def tail_bound(u: ScalarField, K: Kernel, m: int, R: float, cfg: QuadConfig | None = None) -> float:
    """int_{|y|>R} |u(y)| sup_{|alpha|=m, x in B_1} |d^alpha_x K(x, y)| dy."""
    cfg = cfg or QuadConfig()
    if u.support_radius is not None and u.support_radius <= R:
        return 0.0
    growth = u.tail_growth()
    res = integrate_tail(lambda y: np.abs(u(y)) * K.sup_deriv_ball(m, y), R,
                         0.0 if growth == -math.inf else growth, K.deriv_decay(m), cfg, n=K.dim,
                         radial_breaks=[abs(b) for b in u.breakpoints if abs(b) > R])
    return float(res.value) + float(res.err_est)


# ---------------------------------------------------------------------------
# limit driver


@dataclass
class LimitReport:
    """f_R and P_R along a schedule of cut-off radii, and the limit f_u."""

    grid: np.ndarray
    m: int
    R_schedule: list[float]
    fR_values: np.ndarray
    fR_errors: np.ndarray
    P_R: list[Polynomial]
    f_limit: np.ndarray
    f_limit_err: np.ndarray
    tail_bounds: list[float]
    residuals: list[float]
    uniform_distance: list[float]
    converged: bool
    converged_at: int | None
    tol: float
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "m": self.m,
            "R_schedule": list(self.R_schedule),
            "fR_values": self.fR_values.tolist(),
            "fR_errors": self.fR_errors.tolist(),
            "P_R": [p.coefficient_vector().tolist() for p in self.P_R],
            "basis": [str(a) for a in enumerate_multi_indices(self.grid.shape[1], self.m - 1)],
            "f_limit": self.f_limit.tolist(),
            "f_limit_err": self.f_limit_err.tolist(),
            "tail_bounds": list(self.tail_bounds),
            "residuals": list(self.residuals),
            "uniform_distance": list(self.uniform_distance),
            "converged": self.converged,
            "converged_at": self.converged_at,
            "tol": self.tol,
            "diagnostics": list(self.diagnostics),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.grid.shape[1]
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"R={R:g}" for R in self.R_schedule] + ["f_limit"])
        for j, x in enumerate(self.grid):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v)) for v in self.fR_values[:, j]]
                       + [repr(float(self.f_limit[j]))])
        return buf.getvalue()


def _fit_residual(values: np.ndarray, grid: np.ndarray, degree: int) -> float:
    if degree < 0:
        return float(np.max(np.abs(values)))
    try:
        _, res = best_poly_fit((grid, values), grid.shape[1], degree)
    except DegenerateSampleError:
        return float(np.max(np.abs(values)))
    return res


def limit_driver(u: ScalarField, K: Kernel, m: int, grid=None, R_schedule=(4, 8, 16, 32, 64, 128, 256, 512),
                 cfg: QuadConfig | None = None, *, tol: float = 1e-6, compute_limit: bool = True) -> LimitReport:
    """Drive R -> infinity in A(chi_R u) = f_R + P_R on a grid in B_1.

    f1 and f2 do not depend on R; theta and f* accumulate annulus by
    annulus. The limit f_u = f1 + f2 + f3 uses f3 = int_{|y|>3} u psi from a
    certified tail integral. Residuals are the sup over the grid of
    f_{R_j} - f_{R_{j-1}} after removing the best polynomial of degree
    m - 1. Convergence needs the last residual below ``tol`` and either
    three successive decreases or every residual below ``tol``.
    """
    cfg = cfg or QuadConfig()
    _check_order(K, m)
    n = K.dim
    X = default_grid(n) if grid is None else _grid(grid, n)
    sched = [float(R) for R in R_schedule]
    if not sched or sched[0] < 4 or any(b <= a for a, b in zip(sched[:-1], sched[1:])):
        raise HypothesisError("R_schedule must be increasing and start at R >= 4")
    diagnostics: list[str] = []
    f1, f2 = _f1(u, K, X, cfg), _f2(u, K, X, cfg)
    base = np.atleast_1d(f1.value) + np.atleast_1d(f2.value)
    base_err = np.atleast_1d(f1.err_est) + np.atleast_1d(f2.err_est)
    if not (f1.converged and f2.converged):
        diagnostics.append(f"f1/f2 quadrature: {f1.diagnostic or f2.diagnostic}")
    alphas = enumerate_multi_indices(n, m - 1)
    theta = np.zeros(len(alphas))
    theta_err = np.zeros(len(alphas))
    fstar = np.zeros(X.shape[0])
    fstar_err = np.zeros(X.shape[0])
    fR, fR_err, polys, bounds = [], [], [], []
    r_prev = 3.0
    th_int = _theta_integrand(u, K, alphas) if alphas else None
    fs_int = _fstar_integrand(u, K, m, X)
    for R in sched:
        if u.support_radius is None or r_prev < u.support_radius:
            hi = R if u.support_radius is None else min(R, u.support_radius)
            if hi > r_prev:
                if alphas:
                    th = _annulus_integral(th_int, u, n, r_prev, hi, cfg)
                    theta = theta + np.atleast_1d(th.value)
                    theta_err = theta_err + np.atleast_1d(th.err_est)
                fs = _annulus_integral(fs_int, u, n, r_prev, hi, cfg)
                fstar = fstar + np.atleast_1d(fs.value)
                fstar_err = fstar_err + np.atleast_1d(fs.err_est)
                if not fs.converged:
                    diagnostics.append(f"f* quadrature at R={R:g}: {fs.diagnostic}")
        r_prev = R
        fR.append(base + fstar)
        fR_err.append(base_err + fstar_err + _poly_err_on_grid(theta_err, alphas, X))
        polys.append(Polynomial(n, m - 1, dict(zip(alphas, (-theta).tolist()))))
        try:
            bounds.append(tail_bound(u, K, m, R, cfg))
        except DivergentIntegralError as exc:
            bounds.append(math.inf)
            if len(bounds) == 1:
                diagnostics.append(f"tail bound: {exc}")
    fR_arr = np.array(fR)
    residuals = [_fit_residual(fR_arr[j] - fR_arr[j - 1], X, m - 1) for j in range(1, len(sched))]

    f_lim, f_lim_err = fR_arr[-1].copy(), fR_err[-1].copy()
    if compute_limit:
        try:
            if u.support_radius is not None and u.support_radius <= sched[-1]:
                f3 = QuadResult(fstar, fstar_err)
            else:
                f3 = far_field(u, K, m, X, cfg)
            f_lim = base + np.atleast_1d(f3.value)
            f_lim_err = base_err + np.atleast_1d(f3.err_est)
        except DivergentIntegralError as exc:
            diagnostics.append(f"limit tail: {exc}")
    uniform = [float(np.max(np.abs(fR_arr[j] - f_lim))) for j in range(len(sched))]

    converged, at = False, None
    for j in range(len(residuals)):
        last = residuals[j]
        window = residuals[max(0, j - 2):j + 1]
        decreasing = len(window) == 3 and window[0] > window[1] > window[2]
        if last <= tol and (decreasing or all(r <= tol for r in residuals[:j + 1])):
            converged, at = True, j + 1
            break
    if not residuals and len(sched) == 1:
        diagnostics.append("a single radius cannot establish convergence")
    if not converged:
        stalled = bounds[-1] if bounds else math.nan
        diagnostics.append(f"no convergence within the schedule; last tail bound {stalled:.3e}")
    return LimitReport(X, m, sched, fR_arr, np.array(fR_err), polys, f_lim, f_lim_err, bounds, residuals, uniform,
                       converged, at, tol, diagnostics)


def _poly_err_on_grid(theta_err: np.ndarray, alphas: list[MultiIndex], X: np.ndarray) -> np.ndarray:
    if not alphas:
        return np.zeros(X.shape[0])
    return sum(e * np.abs(np.atleast_1d(monomial(a, X))) for e, a in zip(theta_err, alphas))
