"""Touching-test checks of the viscosity inequalities for A u = f up to polynomials.

A test function phi touching u at x0 is glued to u: phi_glued = u + w (phi - u)
with w = 1 on B_{1/8}(x0), falling smoothly to 0 at radius 1/4. For a
nonnegative kernel, phi <= u with equality at x0 forces
A phi_glued(x0) >= A u(x0), and phi >= u forces the reverse. Each test
compares A(chi_R phi_glued)(x0) - P_R(x0) with f(x0) along the cut-off
schedule. The polynomial P_R depends only on values outside B_3, so it is
shared by u and its glued test functions.

A finite battery can only find violations; a clean run is reported as
"no violation found".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exprfunc import ScalarField
from .kernels import Kernel
from .operator import CutoffSpec, HypothesisError, decompose, default_grid, limit_driver
from .quadrature import QuadConfig

__all__ = [
    "GLUE_RADIUS",
    "KernelSignError",
    "TouchingTest",
    "ViscosityReport",
    "check_viscosity",
    "glue",
    "paraboloid_family",
]

GLUE_RADIUS = 0.25


class KernelSignError(HypothesisError):
    """The touching inequalities need a nonnegative kernel."""


def _bump_weight(r: np.ndarray, radius: float) -> np.ndarray:
    """1 for r <= radius/2, 0 for r >= radius, C-infinity in between."""
    t = np.clip((radius - r) / (0.5 * radius), 0.0, 1.0)
    out = np.zeros_like(t)
    mid = (t > 0) & (t < 1)
    a = np.exp(-1.0 / t[mid])
    b = np.exp(-1.0 / (1.0 - t[mid]))
    out[mid] = a / (a + b)
    out[t >= 1] = 1.0
    return out


def glue(phi: ScalarField, u: ScalarField, x0, radius: float = GLUE_RADIUS) -> ScalarField:
    """phi near x0, u outside B_radius(x0), smooth in between."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    pf, uf = phi.func, u.func

    def func(p):
        w = _bump_weight(np.linalg.norm(p - x0[None, :], axis=1), radius)
        out = uf(p)
        nz = w > 0
        if np.any(nz):
            out = out.copy()
            out[nz] = out[nz] + w[nz] * (pf(p[nz]) - out[nz])
        return out

    return ScalarField(u.dim, func, None, min(phi.theta_class, u.theta_class), u.growth_exponent,
                       u.support_radius if u.support_radius is None else max(u.support_radius,
                                                                             float(np.linalg.norm(x0)) + radius),
                       u.breakpoints, f"glue({phi.name})")


@dataclass
class TouchingTest:
    """phi touching u at x0 from ``side`` ("below": phi <= u, "above": phi >= u) on B_{1/4}(x0)."""

    x0: np.ndarray
    phi: ScalarField
    side: str
    touch_gap: float
    curvature: float | None = None
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.side not in ("below", "above"):
            raise ValueError("side must be 'below' or 'above'")
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.center is None:
            self.center = self.x0.copy()

    def to_dict(self) -> dict:
        return {"x0": self.x0.tolist(), "center": self.center.tolist(), "side": self.side,
                "touch_gap": self.touch_gap, "curvature": self.curvature, "phi": self.phi.name}


def _ball_samples(center: np.ndarray, radius: float, count: int = 801) -> np.ndarray:
    if center.size == 1:
        return center[0] + np.linspace(-radius, radius, count)[:, None]
    k = int(math.sqrt(count)) | 1
    g = np.linspace(-radius, radius, k)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    return center[None, :] + pts


def paraboloid_family(x0, curvature_list: Sequence[float], u: ScalarField,
                      radius: float = GLUE_RADIUS) -> list[TouchingTest]:
    """Paraboloids u(x0) + grad u(x0).(y - x0) + c |y - x0|^2 / 2, shifted vertically to touch u.

    Every curvature gives one test per side. The shift makes the largest
    (below) or smallest (above) value of phi - u on the ball zero; the
    touching point is where that extremum sits, which moves off x0 when the
    curvature does not fit the side.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if n != u.dim:
        raise ValueError("point and function dimensions differ")
    u0 = float(u(x0[None, :])[0])
    grad = np.atleast_1d(u.grad(x0[None, :]).reshape(-1))
    if not (math.isfinite(u0) and np.all(np.isfinite(grad))):
        raise ValueError("u is not evaluable at x0")
    pts = _ball_samples(x0, radius)
    tests = []
    for c in curvature_list:
        def base(p, c=float(c)):
            d = p - x0[None, :]
            return u0 + d @ grad + 0.5 * c * np.sum(d * d, axis=1)

        gap = base(pts) - u(pts)
        for side in ("below", "above"):
            j = int(np.argmax(gap) if side == "below" else np.argmin(gap))
            touch = pts[j].copy()
            shift = float(gap[j])
            if n == 1:
                lo = max(x0[0] - radius, touch[0] - 2 * radius / (pts.shape[0] - 1))
                hi = min(x0[0] + radius, touch[0] + 2 * radius / (pts.shape[0] - 1))
                sgn = -1.0 if side == "below" else 1.0
                res = minimize_scalar(lambda t: sgn * float(base(np.array([[t]]))[0] - u(np.array([[t]]))[0]),
                                      bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
                cand = sgn * float(res.fun)
                if (side == "below" and cand > shift) or (side == "above" and cand < shift):
                    shift, touch = cand, np.array([res.x])

            def phi_func(p, shift=shift, base=base):
                return base(p) - shift

            phi = ScalarField(n, phi_func, None, 2.0, 2.0, None, (), f"paraboloid(c={float(c):g},{side})")
            diff = phi_func(pts) - u(pts)
            touch_gap = float(np.min(-diff) if side == "below" else np.min(diff))
            tests.append(TouchingTest(touch, phi, side, touch_gap, float(c), x0.copy()))
    return tests


@dataclass
class ViscosityReport:
    margins: list[list[float]]
    tests: list[TouchingTest]
    R_schedule: list[float]
    uniform_distance: list[float]
    tol: float
    passed: bool
    notes: list[str] = field(default_factory=list)

    @property
    def min_margin(self) -> float:
        flat = [v for row in self.margins for v in row]
        return min(flat) if flat else math.inf

    def to_dict(self) -> dict:
        return {
            "tests": [dict(t.to_dict(), margins=row) for t, row in zip(self.tests, self.margins)],
            "R_schedule": list(self.R_schedule),
            "uniform_distance": list(self.uniform_distance),
            "min_margin": self.min_margin,
            "tol": self.tol,
            "status": "PASS" if self.passed else "FAIL",
            "verdict": "no violation found" if self.passed else "violation found",
            "notes": list(self.notes),
        }


def _f_at(f, pts: np.ndarray) -> np.ndarray:
    if isinstance(f, ScalarField):
        return np.atleast_1d(f(pts))
    if callable(f):
        return np.atleast_1d(np.asarray(f(pts), dtype=float))
    return np.full(pts.shape[0], float(f))


def check_viscosity(u: ScalarField, K: Kernel, f: ScalarField | Callable | float, m: int,
                    R_schedule: Sequence[float], tests: Sequence[TouchingTest], cfg: QuadConfig | None = None, *,
                    tol: float = 1e-3, grid=None, radius: float = GLUE_RADIUS) -> ViscosityReport:
    """Margins of the touching inequalities for every test and cut-off radius.

    For a test touching from below the margin is A(chi_R phi_glued)(x0) - P_R(x0) - f(x0);
    from above it is the negative. PASS needs every margin >= -tol and the
    grid distance sup |f_R - f| at the last radius within ``tol``.
    """
    cfg = cfg or QuadConfig()
    if not K.nonnegative:
        raise KernelSignError(f"kernel {K.name!r} changes sign; the touching inequalities need K >= 0")
    sched = [float(R) for R in R_schedule]
    X = default_grid(u.dim) if grid is None else np.asarray(grid, dtype=float).reshape(-1, u.dim)
    rep = limit_driver(u, K, m, X, sched, cfg, compute_limit=False)
    target = _f_at(f, X)
    uniform = [float(np.max(np.abs(rep.fR_values[j] - target))) for j in range(len(sched))]
    notes = []
    margins = []
    for test in tests:
        if not np.isfinite(test.touch_gap) or test.touch_gap < -tol:
            notes.append(f"test at {test.x0.tolist()} does not touch (gap {test.touch_gap:.3e})")
        glued = glue(test.phi, u, test.center, radius)
        fx = float(_f_at(f, test.x0[None, :])[0])
        row = []
        for R in sched:
            dec = decompose(glued, K, CutoffSpec("sharp", R), m, test.x0[None, :], cfg)
            val = float(dec.total[0] - dec.P_values[0])
            row.append(val - fx if test.side == "below" else fx - val)
        margins.append(row)
    flat = [v for row in margins for v in row]
    passed = all(v >= -tol for v in flat) and uniform[-1] <= tol and not notes
    if uniform[-1] > tol:
        notes.append(f"f_R does not approach f uniformly: last grid distance {uniform[-1]:.3e}")
    return ViscosityReport(margins, list(tests), sched, uniform, tol, passed, notes)
