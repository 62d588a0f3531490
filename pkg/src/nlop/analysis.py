"""Closed-form oracles for two explicit families and numerical probes of stability under limits.

Family "linear ramp": u_k(y) = k y for y > k, zero otherwise, against the
raw kernel 1/|x-y|^2 (n = 1, s = 1/2). Up to a constant in x,
A(chi_R u_k) converges to -f_k with f_k(x) = k x/(k-x) + k log(k/(k-x)),
and f_k -> 2x while u_k -> 0.

Family "log-normalised ramp": u_k(y) = -chi_(k,k^2)(y) y / log k with the
same kernel. A u_k = g_k -> 1 uniformly on (-1, 1) although u_k -> 0, and the
far-field integral of |u_k| K stays near 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exprfunc import ScalarField
from .kernels import Kernel
from .multiindex import DegenerateSampleError, Polynomial, best_poly_fit
from .operator import default_grid, limit_driver
from .quadrature import Annulus, DivergentIntegralError, QuadConfig, integrate_region, integrate_tail

__all__ = [
    "CounterexampleCase",
    "PolyRecovery",
    "StabilityReport",
    "counterexample_applied",
    "counterexample_fk",
    "counterexample_truncated",
    "logramp_bounds",
    "logramp_fk",
    "poly_difference_recovery",
    "stability_probe",
]


@dataclass(frozen=True)
class CounterexampleCase:
    k: int
    R: float
    x: float

    def __post_init__(self):
        if not (self.R > self.k > 1):
            raise ValueError("need R > k > 1")
        if not abs(self.x) < 1:
            raise ValueError("need |x| < 1")


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 1):
        raise ValueError("need |x| < 1")
    return x


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def counterexample_fk(k: float, x):
    """f_k(x) = k x/(k-x) + k log(k/(k-x))."""
    if not k > 1:
        raise ValueError("need k > 1")
    x = _check_x(x)
    return _out(k * x / (k - x) + k * np.log(k / (k - x)))


def counterexample_truncated(k: float, R: float, x):
    """k int_k^R y/(y-x)^2 dy in closed form."""
    if not R > k > 1:
        raise ValueError("need R > k > 1")
    x = _check_x(x)
    val = (counterexample_fk(k, x) + k * np.log((R - x) / R) - k * x / (R - x) + k * math.log(R) - k * math.log(k))
    return _out(val)


def counterexample_applied(k: float, R: float, x):
    """A(chi_R u_k)(x) for the linear ramp against 1/|x-y|^2.

    u_k vanishes on (-1, 1), so the operator is -int chi_R u_k(y) K dy and
    carries the opposite sign to :func:`counterexample_truncated`.
    """
    return _out(-np.asarray(counterexample_truncated(k, R, x)))


def logramp_fk(k: float, x):
    """A u_k(x) for u_k = -chi_(k,k^2) y / log k against 1/|x-y|^2.

    Equals (1/log k) int_k^{k^2} y/(y-x)^2 dy, using the antiderivative
    log(y-x) - x/(y-x).
    """
    if not k > 1:
        raise ValueError("need k > 1")
    x = _check_x(x)
    k2 = float(k) * float(k)
    val = (np.log((k2 - x) / (k - x)) + x / (k - x) - x / (k2 - x)) / math.log(k)
    return _out(val)


def logramp_bounds(k: float, s: float = 0.5) -> tuple[float, float]:
    """(lower, upper) = ((k/(k+1))^(1+2s), (k/(k-1))^(1+2s)) enclosing the family values on (-1, 1)."""
    p = 1 + 2 * s
    return (k / (k + 1)) ** p, (k / (k - 1)) ** p


# ---------------------------------------------------------------------------
# stability probe


@dataclass
class StabilityReport:
    """Hypothesis integrals and conclusions along a finite sequence u_k -> u."""

    labels: list[str]
    far_field: list[float]
    near_sup: list[float]
    f_seq: np.ndarray
    f_lim: np.ndarray
    gap: list[float]
    grid: np.ndarray
    m: int
    far_field_holds: bool
    conclusion_holds: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "far_field": [_json_float(v) for v in self.far_field],
            "near_sup": list(self.near_sup),
            "f_seq": self.f_seq.tolist(),
            "f_lim": self.f_lim.tolist(),
            "gap": list(self.gap),
            "grid": self.grid.tolist(),
            "m": self.m,
            "far_field_holds": self.far_field_holds,
            "conclusion_holds": self.conclusion_holds,
            "notes": self.notes,
        }


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "nan")


def _far_field(diff: ScalarField, K: Kernel, xs: np.ndarray, cfg: QuadConfig) -> float:
    """max over xs of int_{|y|>3} |diff(y)| |K(x, y)| dy."""
    def f(y):
        return np.abs(diff(y))[:, None] * np.abs(K(xs[None, :, :], y[:, None, :]))
    breaks = sorted({abs(b) for b in diff.breakpoints if abs(b) > 3})
    if diff.support_radius is not None:
        if diff.support_radius <= 3:
            return 0.0
        res = integrate_region(f, Annulus(tuple(np.zeros(K.dim)), 3.0, diff.support_radius), cfg,
                               radial_breaks=[b for b in breaks if b < diff.support_radius])
    else:
        growth = diff.tail_growth()
        res = integrate_tail(f, 3.0, max(growth, 0.0), K.tail_decay, cfg, n=K.dim, radial_breaks=breaks)
    return float(np.max(res.value))


def _gap(values: np.ndarray, grid: np.ndarray, m: int) -> float:
    if m == 0:
        return float(np.max(np.abs(values)))
    try:
        return best_poly_fit((grid, values), grid.shape[1], m - 1)[1]
    except DegenerateSampleError:
        return float(np.max(np.abs(values)))


def stability_probe(u_seq: Sequence[ScalarField], u_lim: ScalarField, K: Kernel, m: int, grid=None,
                    cfg: QuadConfig | None = None, *, labels: Sequence[str] | None = None,
                    tol: float = 1e-3, R_schedule=(4, 8)) -> StabilityReport:
    """Evaluate the far-field hypothesis and the limit conclusion along ``u_seq``.

    For every member the report holds the far-field integral
    max_x int_{|y|>3} |u - u_k| |K(x, y)| dy, the sup of |u_k - u| on B_4,
    and f_k from :func:`limit_driver`. ``gap`` is the distance, modulo
    polynomials of degree m-1, between f_k and the limit's f on the grid.
    A member whose far-field integral diverges is recorded as inf.
    """
    cfg = cfg or QuadConfig()
    X = default_grid(K.dim) if grid is None else np.asarray(grid, dtype=float).reshape(-1, K.dim)
    labels = list(labels) if labels is not None else [u.name for u in u_seq]
    probe = X[np.linspace(0, X.shape[0] - 1, 5).round().astype(int)]
    near_pts = np.linspace(-4, 4, 801)[:, None] if K.dim == 1 else 4 * default_grid(2)
    lim_rep = limit_driver(u_lim, K, m, X, R_schedule, cfg)
    f_lim = lim_rep.f_limit
    far, near, fs, gaps, notes = [], [], [], [], []
    for lab, uk in zip(labels, u_seq):
        diff = uk + u_lim.scaled(-1.0)
        try:
            far.append(_far_field(diff, K, probe, cfg))
        except DivergentIntegralError as exc:
            far.append(math.inf)
            notes.append(f"{lab}: far-field integral diverges ({exc})")
        near.append(float(np.max(np.abs(diff(near_pts)))))
        rep = limit_driver(uk, K, m, X, R_schedule, cfg)
        fs.append(rep.f_limit)
        gaps.append(_gap(rep.f_limit - f_lim, X, m))
    far_holds = bool(far and far[-1] <= tol)
    concl = bool(gaps and gaps[-1] <= tol)
    return StabilityReport(labels, far, near, np.array(fs), f_lim, gaps, X, m, far_holds, concl, notes)


# ---------------------------------------------------------------------------
# polynomial difference recovery


@dataclass
class PolyRecovery:
    polynomial: Polynomial
    residual: float
    passed: bool

    def to_dict(self) -> dict:
        return {"polynomial": self.polynomial.to_dict(), "residual": self.residual,
                "status": "PASS" if self.passed else "FAIL"}


def poly_difference_recovery(f1_grid, f2_grid, grid, n: int, m: int, tol: float = 1e-8) -> PolyRecovery:
    """Fit f2 - f1 by a polynomial of degree m-1; PASS when the sup residual is within ``tol``."""
    a = np.asarray(f1_grid, dtype=float)
    b = np.asarray(f2_grid, dtype=float)
    if a.shape != b.shape:
        raise ValueError("grids are not aligned")
    poly, res = best_poly_fit((np.asarray(grid, dtype=float).reshape(-1, n), b - a), n, m - 1)
    return PolyRecovery(poly, res, res <= tol)
