"""Adaptive quadrature on intervals, balls, annuli and unbounded tails.

Everything is built on one vectorized Gauss-Kronrod (7, 15) engine. Integrands
receive a batch of abscissae and may return either one value per abscissa or
a row of values (vector-valued integrands, used to integrate a whole grid of
evaluation points at once).

Conventions
-----------
* 1D interval integrands take ``t`` of shape ``(P,)``.
* Region integrands (balls, annuli, tails) take points of shape ``(P, n)``.
* Return shape is ``(P,)`` or ``(P, V)``; results are floats or ``(V,)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "Annulus",
    "Ball",
    "DivergentIntegralError",
    "Interval",
    "QuadConfig",
    "QuadResult",
    "gk_interval",
    "gk_rectangle",
    "integrate_region",
    "integrate_tail",
    "integrate_unit_interval_weighted",
    "jacobi_rule",
    "pv_second_difference",
    "pv_shells",
]

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point rule on [-1, 1]
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
WG = np.zeros(15)
_g_pos = [1, 3, 5]  # positions of Gauss nodes among the first seven
for j, p in enumerate(_g_pos):
    WG[p] = _WG[j]
    WG[14 - p] = _WG[j]
WG[7] = _WG[3]
WDIFF = WK - WG

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


class DivergentIntegralError(ValueError):
    """The integral does not converge (for example a tail with no decay margin)."""


@dataclass(frozen=True)
class QuadConfig:
    """Tolerances for every integral in the library.

    ``tail_truncation_policy`` is ``"growth_certified"`` (truncate tails at a
    radius certified by growth metadata) or ``"fixed_radius"`` (truncate at
    ``fixed_radius`` and report the remainder bound only as diagnostic).
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    max_depth: int = 40
    tail_truncation_policy: str = "growth_certified"
    fixed_radius: float = 1e4
    max_panels: int = 20000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.tail_truncation_policy not in ("growth_certified", "fixed_radius"):
            raise ValueError(f"unknown tail_truncation_policy {self.tail_truncation_policy!r}")

    def tolerance(self, value) -> np.ndarray:
        return np.maximum(self.abs_tol, self.rel_tol * np.abs(value))

    def scaled(self, factor: float) -> "QuadConfig":
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)

    def to_dict(self) -> dict:
        return {
            "abs_tol": self.abs_tol,
            "rel_tol": self.rel_tol,
            "max_depth": self.max_depth,
            "tail_truncation_policy": self.tail_truncation_policy,
            "fixed_radius": self.fixed_radius,
            "max_panels": self.max_panels,
        }


@dataclass
class QuadResult:
    """Value with an error estimate.

    ``value`` and ``err_est`` are floats, or arrays of equal shape for
    vector-valued integrands.
    """

    value: float | np.ndarray
    err_est: float | np.ndarray
    evaluations: int = 0
    converged: bool = True
    diagnostic: str = ""

    def __post_init__(self):
        self.value = _squeeze(self.value)
        self.err_est = _squeeze(np.abs(self.err_est))

    def __add__(self, other: "QuadResult") -> "QuadResult":
        if not isinstance(other, QuadResult):
            return NotImplemented
        diag = "; ".join(d for d in (self.diagnostic, other.diagnostic) if d)
        return QuadResult(
            np.add(self.value, other.value),
            np.add(self.err_est, other.err_est),
            self.evaluations + other.evaluations,
            self.converged and other.converged,
            diag,
        )

    def __neg__(self) -> "QuadResult":
        return QuadResult(np.negative(self.value), self.err_est, self.evaluations, self.converged, self.diagnostic)

    def __sub__(self, other: "QuadResult") -> "QuadResult":
        return self + (-other)

    def scale(self, factor) -> "QuadResult":
        return QuadResult(np.multiply(self.value, factor), np.abs(np.multiply(self.err_est, factor)),
                          self.evaluations, self.converged, self.diagnostic)

    @classmethod
    def zero(cls, shape=()) -> "QuadResult":
        return cls(np.zeros(shape), np.zeros(shape), 0, True, "")

    def to_dict(self) -> dict:
        return {
            "value": _jsonable(self.value),
            "err_est": _jsonable(self.err_est),
            "evaluations": int(self.evaluations),
            "converged": bool(self.converged),
            "diagnostic": self.diagnostic,
        }


def _squeeze(v):
    a = np.asarray(v, dtype=float)
    return float(a) if a.ndim == 0 else a


def _jsonable(v):
    a = np.asarray(v, dtype=float)
    return float(a) if a.ndim == 0 else a.tolist()


def _as_matrix(vals: np.ndarray, npts: int) -> tuple[np.ndarray, bool]:
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 0:
        vals = np.full(npts, float(vals))
    if vals.shape[0] != npts:
        raise ValueError(f"integrand returned leading dimension {vals.shape[0]}, expected {npts}")
    if vals.ndim == 1:
        return vals[:, None], True
    return vals.reshape(npts, -1), False


# ---------------------------------------------------------------------------
# 1D engine


def _gk_panels(f, lo: np.ndarray, hi: np.ndarray):
    """Apply G7K15 on each panel. Returns (K, |K-G|, resabs) of shape (I, V)."""
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    t = (c[:, None] + h[:, None] * NODES[None, :]).ravel()
    vals, scalar = _as_matrix(f(t), t.size)
    vals = vals.reshape(lo.size, 15, -1)
    k = np.einsum("ipv,p->iv", vals, WK) * h[:, None]
    d = np.einsum("ipv,p->iv", vals, WDIFF) * h[:, None]
    resabs = np.einsum("ipv,p->iv", np.abs(vals), WK) * np.abs(h)[:, None]
    return k, np.abs(d), resabs, scalar


def gk_interval(f: Callable, a: float, b: float, cfg: QuadConfig | None = None, *,
                breakpoints: Sequence[float] = (), initial_panels: int = 1) -> QuadResult:
    """Adaptive Gauss-Kronrod integration of ``f`` over ``[a, b]``.

    Panels are refined in batches: every round splits each panel whose error
    is within a factor of ten of the worst one (relative to the per-component
    tolerance). Interior breakpoints seed the initial partition. The final
    sum runs over panels ordered by position, so results do not depend on
    refinement history.
    """
    cfg = cfg or QuadConfig()
    if a == b:
        probe, scalar = _as_matrix(f(np.array([a])), 1)
        shape = () if scalar else (probe.shape[1],)
        return QuadResult.zero(shape)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    edges = [a] + sorted(p for p in set(breakpoints) if a < p < b) + [b]
    if initial_panels > 1:
        edges = sorted(set(np.concatenate([np.linspace(e0, e1, initial_panels + 1)
                                           for e0, e1 in zip(edges[:-1], edges[1:])]).tolist()))
    lo = np.array(edges[:-1], dtype=float)
    hi = np.array(edges[1:], dtype=float)
    depth = np.zeros(lo.size, dtype=int)

    done_lo, done_k, done_e = [], [], []
    evaluations = 0
    converged = True
    diagnostic = ""
    scalar = True
    while True:
        k, e, resabs, scalar = _gk_panels(f, lo, hi)
        evaluations += 15 * lo.size
        # round-off floor, as in QUADPACK
        e = np.maximum(e, 50 * _EPS * resabs)
        all_k = np.concatenate(done_k + [k]) if done_k else k
        all_e = np.concatenate(done_e + [e]) if done_e else e
        total = all_k.sum(axis=0)
        tol = cfg.tolerance(total)
        if np.all(all_e.sum(axis=0) <= tol):
            done_lo.append(lo); done_k.append(k); done_e.append(e)
            break
        score = np.max(e / tol, axis=1)
        worst = score.max()
        split = (score >= 0.1 * worst) & (score > 0)
        at_depth = depth >= cfg.max_depth
        n_panels = sum(x.shape[0] for x in done_k) + lo.size
        if np.all(at_depth[split]) or n_panels + split.sum() > cfg.max_panels:
            done_lo.append(lo); done_k.append(k); done_e.append(e)
            converged = False
            diagnostic = "max_depth reached" if np.all(at_depth[split]) else "panel budget exhausted"
            break
        split &= ~at_depth
        keep = ~split
        done_lo.append(lo[keep]); done_k.append(k[keep]); done_e.append(e[keep])
        mid = 0.5 * (lo[split] + hi[split])
        lo, hi = np.concatenate([lo[split], mid]), np.concatenate([mid, hi[split]])
        depth = np.concatenate([depth[split], depth[split]]) + 1

    pos = np.concatenate(done_lo)
    order = np.argsort(pos, kind="stable")
    kk = np.concatenate(done_k)[order]
    ee = np.concatenate(done_e)[order]
    value = sign * kk.sum(axis=0)
    err = ee.sum(axis=0)
    if scalar:
        value, err = value[0], err[0]
    return QuadResult(value, err, evaluations, converged, diagnostic)


# ---------------------------------------------------------------------------
# 2D engine on rectangles (tensor Gauss-Kronrod)


def _gk_rect(f, x0, x1, y0, y1):
    cx, hx = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
    cy, hy = 0.5 * (y0 + y1), 0.5 * (y1 - y0)
    X = cx[:, None] + hx[:, None] * NODES[None, :]
    Y = cy[:, None] + hy[:, None] * NODES[None, :]
    pts = np.stack(np.broadcast_arrays(X[:, :, None], Y[:, None, :]), axis=-1).reshape(-1, 2)
    vals, scalar = _as_matrix(f(pts), pts.shape[0])
    vals = vals.reshape(x0.size, 15, 15, -1)
    jac = (hx * hy)[:, None]
    kk = np.einsum("ipqv,p,q->iv", vals, WK, WK) * jac
    gx = np.einsum("ipqv,p,q->iv", vals, WG, WK) * jac
    gy = np.einsum("ipqv,p,q->iv", vals, WK, WG) * jac
    resabs = np.einsum("ipqv,p,q->iv", np.abs(vals), WK, WK) * np.abs(jac)
    return kk, np.abs(kk - gx), np.abs(kk - gy), resabs, scalar


def gk_rectangle(f: Callable, xr: tuple[float, float], yr: tuple[float, float],
                 cfg: QuadConfig | None = None, *, xbreaks: Sequence[float] = (),
                 ybreaks: Sequence[float] = ()) -> QuadResult:
    """Adaptive tensor Gauss-Kronrod cubature over a rectangle.

    ``f`` takes points of shape ``(P, 2)``. Panels split along the direction
    with the larger one-directional error estimate.
    """
    cfg = cfg or QuadConfig()
    xe = [xr[0]] + sorted(p for p in set(xbreaks) if xr[0] < p < xr[1]) + [xr[1]]
    ye = [yr[0]] + sorted(p for p in set(ybreaks) if yr[0] < p < yr[1]) + [yr[1]]
    x0, y0 = np.meshgrid(xe[:-1], ye[:-1], indexing="ij")
    x1, y1 = np.meshgrid(xe[1:], ye[1:], indexing="ij")
    x0, x1, y0, y1 = (np.asarray(a, dtype=float).ravel() for a in (x0, x1, y0, y1))
    depth = np.zeros(x0.size, dtype=int)
    done_key, done_k, done_e = [], [], []
    evaluations = 0
    converged = True
    diagnostic = ""
    scalar = True
    while True:
        k, ex, ey, resabs, scalar = _gk_rect(f, x0, x1, y0, y1)
        evaluations += 225 * x0.size
        e = np.maximum(ex + ey, 50 * _EPS * resabs)
        all_k = np.concatenate(done_k + [k]) if done_k else k
        all_e = np.concatenate(done_e + [e]) if done_e else e
        tol = cfg.tolerance(all_k.sum(axis=0))
        if np.all(all_e.sum(axis=0) <= tol):
            done_key.append(np.stack([x0, y0], 1)); done_k.append(k); done_e.append(e)
            break
        score = np.max(e / tol, axis=1)
        split = (score >= 0.1 * score.max()) & (score > 0)
        at_depth = depth >= cfg.max_depth
        n_panels = sum(x.shape[0] for x in done_k) + x0.size
        if np.all(at_depth[split]) or n_panels + split.sum() > cfg.max_panels // 4:
            done_key.append(np.stack([x0, y0], 1)); done_k.append(k); done_e.append(e)
            converged = False
            diagnostic = "max_depth reached" if np.all(at_depth[split]) else "panel budget exhausted"
            break
        split &= ~at_depth
        keep = ~split
        done_key.append(np.stack([x0[keep], y0[keep]], 1)); done_k.append(k[keep]); done_e.append(e[keep])
        along_x = np.max(ex, axis=1)[split] >= np.max(ey, axis=1)[split]
        sx0, sx1, sy0, sy1, sd = x0[split], x1[split], y0[split], y1[split], depth[split]
        mx = 0.5 * (sx0 + sx1)
        my = 0.5 * (sy0 + sy1)
        nx0 = np.concatenate([sx0, np.where(along_x, mx, sx0)])
        nx1 = np.concatenate([np.where(along_x, mx, sx1), sx1])
        ny0 = np.concatenate([sy0, np.where(along_x, sy0, my)])
        ny1 = np.concatenate([np.where(along_x, sy1, my), sy1])
        x0, x1, y0, y1 = nx0, nx1, ny0, ny1
        depth = np.concatenate([sd, sd]) + 1
    key = np.concatenate(done_key)
    order = np.lexsort((key[:, 1], key[:, 0]))
    value = np.concatenate(done_k)[order].sum(axis=0)
    err = np.concatenate(done_e)[order].sum(axis=0)
    if scalar:
        value, err = value[0], err[0]
    return QuadResult(value, err, evaluations, converged, diagnostic)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Interval:
    a: float
    b: float


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float


@dataclass(frozen=True)
class Annulus:
    center: tuple[float, ...]
    r_inner: float
    r_outer: float


def geometric_breaks(r0: float, r1: float, ratio: float = 2.0) -> list[float]:
    """Interior radii splitting ``[r0, r1]`` into roughly geometric pieces."""
    if r0 <= 0 or r1 <= r0 * ratio:
        return []
    n = int(math.ceil(math.log(r1 / r0) / math.log(ratio)))
    return list(np.geomspace(r0, r1, n + 1)[1:-1])


def _radial_integral(f, center: np.ndarray, r0: float, r1: float, cfg: QuadConfig,
                     radial_breaks: Sequence[float]) -> QuadResult:
    """Integral of ``f`` over ``r0 < |y - center| < r1``."""
    n = center.size
    breaks = sorted(set(list(radial_breaks) + (geometric_breaks(r0, r1) if r0 > 0 else [])))
    if n == 1:
        c = float(center[0])

        def g(rho):
            pts = np.concatenate([c + rho, c - rho])[:, None]
            v = np.asarray(f(pts), dtype=float)
            half = rho.size
            return v[:half] + v[half:]

        return gk_interval(g, r0, r1, cfg, breakpoints=breaks)
    if n == 2:
        def g(p):
            rho, phi = p[:, 0], p[:, 1]
            pts = np.stack([center[0] + rho * np.cos(phi), center[1] + rho * np.sin(phi)], axis=1)
            v = np.asarray(f(pts), dtype=float)
            return v * (rho if v.ndim == 1 else rho[:, None])

        return gk_rectangle(g, (r0, r1), (0.0, 2 * math.pi), cfg, xbreaks=breaks,
                            ybreaks=[0.5 * math.pi, math.pi, 1.5 * math.pi])
    raise NotImplementedError("quadrature supports n in {1, 2}")


def integrate_region(f: Callable, region, cfg: QuadConfig | None = None, *, n: int | None = None,
                     radial_breaks: Sequence[float] = (), breakpoints: Sequence[float] = ()) -> QuadResult:
    """Integrate over an interval, a ball or an annulus.

    For an :class:`Interval`, ``f`` takes a ``(P,)`` array of abscissae. For
    balls and annuli, ``f`` takes points of shape ``(P, n)``; ``n`` is read
    from the center. One-dimensional balls are integrated through the
    symmetrized integrand ``f(c+t) + f(c-t)`` on ``[0, r]``, so odd
    integrands cancel exactly panel by panel.
    """
    cfg = cfg or QuadConfig()
    if isinstance(region, Interval):
        return gk_interval(f, region.a, region.b, cfg, breakpoints=breakpoints)
    if isinstance(region, Ball):
        c = np.atleast_1d(np.asarray(region.center, dtype=float))
        if region.radius <= 0:
            raise ValueError("ball radius must be positive")
        return _radial_integral(f, c, 0.0, region.radius, cfg, radial_breaks)
    if isinstance(region, Annulus):
        c = np.atleast_1d(np.asarray(region.center, dtype=float))
        if not 0 <= region.r_inner < region.r_outer:
            raise ValueError("annulus needs 0 <= r_inner < r_outer")
        return _radial_integral(f, c, region.r_inner, region.r_outer, cfg, radial_breaks)
    raise TypeError(f"unsupported region {region!r}")


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere in R^n (2 for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def _tail_constant(f, n: int, inner: float, growth: float, decay: float, center: np.ndarray) -> float:
    """Sampled estimate of C with |f(y)| <= C (1+|y|)^(growth-decay) beyond ``inner``."""
    rho = np.geomspace(inner, inner * 1e6, 61)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    pts = (center[None, None, :] + rho[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    vals = np.abs(np.asarray(f(pts), dtype=float)).reshape(pts.shape[0], -1)
    r = np.linalg.norm(pts, axis=1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ratio = vals / ((1 + r)[:, None] ** (growth - decay))
    ratio = ratio[np.isfinite(ratio)]
    return 2.0 * float(ratio.max()) if ratio.size else 0.0


def integrate_tail(f: Callable, inner_radius: float, growth: float, decay: float,
                   cfg: QuadConfig | None = None, *, n: int = 1, center=None,
                   radial_breaks: Sequence[float] = ()) -> QuadResult:
    """Integral of ``f`` over ``|y - center| > inner_radius``.

    ``f`` must satisfy ``|f(y)| <= C (1+|y|)^(growth - decay)``. The integral
    is computed out to a radius ``R*`` where the analytic remainder
    ``C |S^{n-1}| int_{R*}^inf rho^(n-1+growth-decay) drho`` is below half the
    tolerance; that remainder is included in ``err_est``. ``decay = inf``
    means faster than any power, in which case ``R*`` grows until the
    sampled integrand is negligible.
    """
    cfg = cfg or QuadConfig()
    center = np.zeros(n) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    margin = decay - growth - n
    if not margin > 0:
        raise DivergentIntegralError(
            f"tail diverges: decay {decay} - growth {growth} - n {n} = {margin} <= 0")
    surf = sphere_measure(n)
    C = _tail_constant(f, n, inner_radius, growth, decay, center)
    tol = cfg.abs_tol
    if math.isinf(decay):
        R_star = _rapid_decay_radius(f, n, inner_radius, center, tol)
        remainder = 0.0
    elif cfg.tail_truncation_policy == "fixed_radius":
        R_star = max(cfg.fixed_radius, 2 * inner_radius)
        remainder = C * surf * R_star ** (-margin) / margin
    else:
        if C == 0:
            R_star, remainder = 2 * inner_radius, 0.0
        else:
            R_star = (2 * C * surf / (margin * tol)) ** (1 / margin)
            R_star = min(max(R_star, 2 * inner_radius), 1e150)
            remainder = C * surf * R_star ** (-margin) / margin
    body = _radial_integral(f, center, inner_radius, R_star, cfg, radial_breaks)
    res = QuadResult(body.value, np.asarray(body.err_est) + remainder, body.evaluations,
                     body.converged, body.diagnostic)
    return res


def _rapid_decay_radius(f, n, inner, center, tol) -> float:
    r = 2 * inner
    while r < 1e6:
        pts = center[None, :] + np.array([[r] + [0.0] * (n - 1), [-r] + [0.0] * (n - 1)])
        v = np.max(np.abs(np.asarray(f(pts), dtype=float)))
        if v * r ** n < 1e-3 * tol * _EPS ** 0.25 or v == 0:
            break
        r *= 1.5
    return r


# ---------------------------------------------------------------------------
# weighted integrals on [0, 1]


_JACOBI_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def jacobi_rule(m: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int_0^1 (1-t)^(m-1) g(t) dt``."""
    key = (m, npts)
    if key not in _JACOBI_CACHE:
        x, w = roots_jacobi(npts, m - 1, 0.0)
        _JACOBI_CACHE[key] = (0.5 * (x + 1.0), w * 0.5 ** m)
    return _JACOBI_CACHE[key]


def integrate_unit_interval_weighted(g: Callable, m: int, cfg: QuadConfig | None = None,
                                     *, start: int = 8, max_points: int = 256) -> QuadResult:
    """Gauss-Jacobi quadrature of ``int_0^1 (1-t)^(m-1) g(t) dt``.

    The node count doubles until two successive rules agree to tolerance;
    the difference is the error estimate.
    """
    if m < 1:
        raise ValueError("weighted integral needs m >= 1")
    cfg = cfg or QuadConfig()
    npts = start
    t, w = jacobi_rule(m, npts)
    prev = np.tensordot(w, np.asarray(g(t), dtype=float), axes=(0, 0))
    evals = npts
    while True:
        npts *= 2
        t, w = jacobi_rule(m, npts)
        cur = np.tensordot(w, np.asarray(g(t), dtype=float), axes=(0, 0))
        evals += npts
        err = np.abs(cur - prev)
        if np.all(err <= cfg.tolerance(cur)):
            return QuadResult(cur, err, evals, True)
        if npts >= max_points:
            return QuadResult(cur, err, evals, False, "weighted rule did not settle")
        prev = cur


# ---------------------------------------------------------------------------
# principal values by dyadic shells


def pv_shells(shell_integral: Callable[[float, float], QuadResult], r: float, cfg: QuadConfig,
              *, min_shells: int = 6, min_radius_factor: float | None = None) -> QuadResult:
    """Sum dyadic shell integrals toward a singular point.

    ``shell_integral(a, b)`` integrates over the shell ``a < |z| < b``. Shells
    are ``[r 2^{-j-1}, r 2^{-j}]``. Their contributions decay geometrically
    when the principal value exists; the missing inner part is estimated by
    an Aitken remainder ``c_j q / (1 - q)`` using the observed ratio ``q``.
    The change of that remainder between steps is the error estimate. A
    ratio near or above one means the shells do not decay, which is
    reported as non-convergence (the hypothesis behind the principal value
    failed).
    """
    if min_radius_factor is None:
        min_radius_factor = _EPS ** 0.25
    contribs: list[np.ndarray] = []
    evals = 0
    converged = True
    diag = ""
    quad_err = 0.0
    remainder = 0.0
    change = 0.0
    prev_est = None
    b = r
    while True:
        a = 0.5 * b
        res = shell_integral(a, b)
        evals += res.evaluations
        quad_err = np.add(quad_err, res.err_est)
        if not res.converged:
            converged = False
            diag = res.diagnostic
        contribs.append(np.asarray(res.value, dtype=float))
        b = a
        total = np.sum(contribs, axis=0)
        if len(contribs) >= 3:
            c1, c0 = contribs[-1], contribs[-2]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(np.abs(c0) > 0, c1 / c0, 0.0)
            q = np.where(np.isfinite(q), q, 0.0)
            tol = cfg.tolerance(total)
            if len(contribs) >= min_shells and np.any((np.abs(q) >= 0.98) & (np.abs(c1) > tol)):
                converged = False
                diag = "shell contributions do not decay (principal value diverges)"
                change = 50 * np.abs(c1)
                remainder = 0.0
                break
            q = np.clip(q, -0.98, 0.98)
            remainder = c1 * q / (1 - q)
            estimate = total + remainder
            if prev_est is not None:
                change = np.abs(estimate - prev_est)
                if len(contribs) >= min_shells and np.all(change <= cfg.tolerance(estimate)):
                    break
            prev_est = estimate
        if b < r * min_radius_factor:
            if np.any(change > cfg.tolerance(total + remainder)):
                converged = False
                diag = "innermost shell reached before the remainder settled"
            break
    value = np.sum(contribs, axis=0) + remainder
    err = np.add(quad_err, change)
    return QuadResult(value, err, evals, converged, diag)


def pv_second_difference(u: Callable, K, x, r, cfg: QuadConfig | None = None) -> QuadResult:
    """P.V. int_{B_r(x)} (u(x) - u(y)) K(x, y) dy through paired points x +- z.

    The integrand over |z| < r is (u(x) - u(x+z)) K(x, x+z) + (u(x) - u(x-z)) K(x, x-z)
    on a half ball, which is (2u(x) - u(x+z) - u(x-z)) K(x, x+z) when the
    kernel is symmetric in z. Shells |z| in [r 2^-(j+1), r 2^-j] are added
    toward the diagonal until the extrapolated total settles.

    ``x`` is one point of shape (n,) or a batch (X, n); ``r`` is a scalar or
    one radius per point. ``u`` maps points (P, n) to (P,) and ``K`` is a
    kernel object with ``dim`` and a broadcasting ``K(x, y)``.
    """
    cfg = cfg or QuadConfig()
    n = K.dim
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1 and (n > 1 or X.size == 1)
    X = X.reshape(-1, n)
    radii = np.broadcast_to(np.asarray(r, dtype=float), (X.shape[0],)).copy()
    if np.any(radii <= 0):
        raise ValueError("radius must be positive")
    ux = np.asarray(u(X), dtype=float).reshape(-1)

    if n == 1:
        def shell(a, b):
            def g(t):
                z = t[:, None] * radii[None, :]
                yp, ym = X[None, :, 0] + z, X[None, :, 0] - z
                vp = np.asarray(u(yp.reshape(-1, 1))).reshape(z.shape)
                vm = np.asarray(u(ym.reshape(-1, 1))).reshape(z.shape)
                xb = np.broadcast_to(X[None, :, :], z.shape + (1,))
                kp, km = K(xb, yp[..., None]), K(xb, ym[..., None])
                return ((ux[None, :] - vp) * kp + (ux[None, :] - vm) * km) * radii[None, :]
            return gk_interval(g, a, b, cfg)
    elif n == 2:
        def shell(a, b):
            def g(p):
                t, phi = p[:, 0], p[:, 1]
                e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
                z = t[:, None, None] * radii[None, :, None] * e[:, None, :]
                yp, ym = X[None] + z, X[None] - z
                vp = np.asarray(u(yp.reshape(-1, 2))).reshape(z.shape[:2])
                vm = np.asarray(u(ym.reshape(-1, 2))).reshape(z.shape[:2])
                xb = np.broadcast_to(X[None], z.shape)
                kp, km = K(xb, yp), K(xb, ym)
                jac = t[:, None] * radii[None, :] ** 2
                return ((ux[None, :] - vp) * kp + (ux[None, :] - vm) * km) * jac
            return gk_rectangle(g, (a, b), (0.0, math.pi), cfg)
    else:
        raise ValueError("only n = 1, 2 are supported")
    res = pv_shells(shell, 1.0, cfg)
    if single:
        return QuadResult(float(np.atleast_1d(res.value)[0]), float(np.atleast_1d(res.err_est)[0]),
                          res.evaluations, res.converged, res.diagnostic)
    return res
