"""Translation-invariant kernels K(x, y) = k(x - y) and their x-derivatives.

Radial kernels are stored through a profile ``g`` of ``q = |z|^2``. Mixed
derivatives follow from

    d^alpha g(|z|^2) = sum_{beta <= alpha/2} g^(|alpha|-|beta|)(q)
                       prod_i alpha_i! / (beta_i! (alpha_i - 2 beta_i)!) (2 z_i)^(alpha_i - 2 beta_i)

Profiles given in ``r = |z|`` are converted with ``d/dq = (1/(2r)) d/dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable

import numpy as np

from .multiindex import MultiIndex, _as_index
from .quadrature import DivergentIntegralError, QuadConfig, gk_interval, integrate_tail, pv_shells, sphere_measure

__all__ = [
    "KERNEL_NAMES",
    "Kernel",
    "KernelError",
    "KernelSpec",
    "ThetaRange",
    "build",
    "callback_kernel",
    "deriv_x",
    "frac_lap_constant",
    "validate_hypotheses",
]

KERNEL_NAMES = ("morse", "buckingham", "gauss", "abel", "mollifier", "frac_lap", "frac_lap_comparable")
MAX_ANALYTIC_ORDER = 8
FD_MAX_ORDER = 2


class KernelError(ValueError):
    """Invalid kernel parameters or an unsupported evaluation."""


@dataclass(frozen=True)
class KernelSpec:
    """Parameters selecting a built-in kernel.

    ``lam`` and ``Lam`` are the comparability constants of the
    fractional-Laplacian class; ``normalized`` multiplies by the constant
    that makes ``frac_lap`` equal to the fractional Laplacian. ``eps`` turns
    on the desingularized form.
    """

    name: str
    dim: int = 1
    s: float | None = None
    lam: float = 1.0
    Lam: float = 1.0
    eps: float | None = None
    normalized: bool = False

    def __post_init__(self):
        if self.name not in KERNEL_NAMES:
            raise KernelError(f"unknown kernel {self.name!r}; choose from {', '.join(KERNEL_NAMES)}")
        if self.dim not in (1, 2):
            raise KernelError("kernels are supported for n in {1, 2}")
        if self.name.startswith("frac_lap"):
            if self.s is None or not 0 < self.s < 1:
                raise KernelError(f"{self.name} needs 0 < s < 1, got s={self.s}")
            if not self.lam > 0:
                raise KernelError("lambda must be positive")
            if self.name == "frac_lap_comparable" and self.Lam < self.lam:
                raise KernelError("need Lambda >= lambda")
        if self.eps is not None and not self.eps > 0:
            raise KernelError(f"desingularization needs eps > 0, got {self.eps}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "s": self.s,
            "lambda": self.lam,
            "Lambda": self.Lam,
            "epsilon": self.eps,
            "normalized": self.normalized,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        allowed = {"name", "dim", "n", "s", "lambda", "Lambda", "epsilon", "eps", "normalized", "lam", "Lam"}
        unknown = set(d) - allowed
        if unknown:
            raise KernelError(f"unknown kernel keys: {sorted(unknown)}")
        return cls(
            name=d["name"],
            dim=int(d.get("dim", d.get("n", 1))),
            s=None if d.get("s") is None else float(d["s"]),
            lam=float(d.get("lambda", d.get("lam", 1.0))),
            Lam=float(d.get("Lambda", d.get("Lam", d.get("lambda", d.get("lam", 1.0))))),
            eps=None if d.get("epsilon", d.get("eps")) is None else float(d.get("epsilon", d.get("eps"))),
            normalized=bool(d.get("normalized", False)),
        )


@dataclass(frozen=True)
class ThetaRange:
    """Regularity exponents ``theta`` in ``(lo, hi]`` (or ``[lo, hi]``)."""

    lo: float
    hi: float = 2.0
    lo_open: bool = True

    def contains(self, theta: float) -> bool:
        above = theta > self.lo if self.lo_open else theta >= self.lo
        return above and theta <= self.hi

    @property
    def empty(self) -> bool:
        return self.lo > self.hi or (self.lo_open and self.lo >= self.hi)

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        return f"{'(' if self.lo_open else '['}{self.lo:g}, {self.hi:g}]"


def frac_lap_constant(n: int, s: float) -> float:
    """Constant C with (-Delta)^s u = C P.V. int (u(x)-u(y)) |x-y|^{-n-2s} dy."""
    return s * 4 ** s * math.gamma(n / 2 + s) / (math.pi ** (n / 2) * math.gamma(1 - s))


# ---------------------------------------------------------------------------
# profile derivatives


@lru_cache(maxsize=None)
def _r_to_q_terms(j: int) -> tuple[tuple[int, int, Fraction], ...]:
    """Terms (i, e, c) with d^j/dq^j h(sqrt q) = sum c r^{-e} h^(i)(r)."""
    terms = {(0, 0): Fraction(1)}
    for _ in range(j):
        nxt: dict[tuple[int, int], Fraction] = {}
        for (i, e), c in terms.items():
            if e:
                key = (i, e + 2)
                nxt[key] = nxt.get(key, Fraction(0)) - c * e / 2
            key = (i + 1, e + 1)
            nxt[key] = nxt.get(key, Fraction(0)) + c / 2
        terms = {k: v for k, v in nxt.items() if v}
    return tuple((i, e, c) for (i, e), c in sorted(terms.items()))


def _from_r_profile(hders: Callable[[np.ndarray, int], list[np.ndarray]], q: np.ndarray, jmax: int):
    r = np.sqrt(q)
    h = hders(r, jmax)
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(jmax + 1):
            acc = np.zeros_like(q)
            for i, e, c in _r_to_q_terms(j):
                acc = acc + float(c) * r ** (-e) * h[i]
            out.append(acc)
    return out


def _falling(a: float, j: int) -> float:
    return math.prod(a - i for i in range(j))


def _power_q(q: np.ndarray, a: float, jmax: int) -> list[np.ndarray]:
    """Derivatives of q^a."""
    with np.errstate(divide="ignore"):
        return [_falling(a, j) * q ** (a - j) for j in range(jmax + 1)]


def _mollifier_q(q: np.ndarray, jmax: int) -> list[np.ndarray]:
    inside = q < 1
    w = np.where(inside, 1 - q, 1.0)
    # phi = -1/(1-q); phi^(k) = -k!/(1-q)^(k+1)
    phid = [-math.factorial(k) / w ** (k + 1) for k in range(jmax + 1)]
    g = [np.where(inside, np.exp(phid[0]), 0.0)]
    for j in range(jmax):
        acc = np.zeros_like(q)
        for i in range(j + 1):
            acc = acc + math.comb(j, i) * phid[i + 1] * g[j - i]
        g.append(np.where(inside, acc, 0.0))
    return g


def _hermite_terms(alpha: tuple[int, ...]):
    """Tuples (|beta|, coefficient, exponents alpha - 2 beta)."""
    ranges = [range(a // 2 + 1) for a in alpha]
    out = []
    for beta in product(*ranges):
        coef = 1.0
        for a, b in zip(alpha, beta):
            coef *= math.factorial(a) / (math.factorial(b) * math.factorial(a - 2 * b)) * 2.0 ** (a - 2 * b)
        out.append((sum(beta), coef, tuple(a - 2 * b for a, b in zip(alpha, beta))))
    return out


# ---------------------------------------------------------------------------
# kernel object


@dataclass(frozen=True)
class Kernel:
    """A kernel with metadata.

    ``gq(q, jmax)`` returns the list of q-derivatives of the radial profile
    up to order ``jmax``. Callback kernels set ``gq = None`` and provide
    ``func(x, y)`` instead; their derivatives use finite differences.
    """

    dim: int
    name: str
    symmetric_in_z: bool
    nonnegative: bool
    singularity_order: float
    admissible_theta: ThetaRange
    max_taylor_order: int
    tail_decay: float
    spec: KernelSpec | None = None
    gq: Callable | None = field(default=None, repr=False, compare=False)
    func: Callable | None = field(default=None, repr=False, compare=False)
    translation_invariant: bool = True
    kink_at_origin: bool = False
    clamp: float | None = None
    power_like: bool = False

    @property
    def singular(self) -> bool:
        return self.singularity_order > 0

    def deriv_decay(self, m: int) -> float:
        """Power decay at infinity of order-m x-derivatives."""
        return self.tail_decay + (m if self.power_like else 0)

    # evaluation --------------------------------------------------------
    def profile(self, z) -> np.ndarray:
        """k(z) for z of shape (..., n)."""
        z = self._points(z)
        if self.gq is None:
            return np.asarray(self.func(np.zeros_like(z), -z), dtype=float)
        q = np.sum(z * z, axis=-1)
        with np.errstate(divide="ignore", over="ignore"):
            val = self.gq(q, 0)[0]
        return self._clamp(val)

    def __call__(self, x, y) -> np.ndarray:
        x, y = self._points(x), self._points(y)
        if self.gq is None:
            return np.asarray(self.func(x, y), dtype=float)
        return self.profile(x - y)

    def _clamp(self, val):
        if self.clamp is None:
            return val
        return np.clip(val, -self.clamp, self.clamp)

    def _points(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.dim == 1 and (p.ndim == 0 or p.shape[-1] != 1):
            p = p[..., None]
        if p.shape[-1] != self.dim:
            raise KernelError(f"point dimension {p.shape[-1]} does not match kernel dimension {self.dim}")
        return p

    # derivatives -------------------------------------------------------
    def deriv_profile(self, alpha, z) -> np.ndarray:
        """d^alpha k at z (x-derivative of K(x, y) with z = x - y)."""
        alpha = _as_index(alpha)
        z = self._points(z)
        if alpha.order == 0:
            return self.profile(z)
        if self.gq is None:
            raise KernelError("callback kernels have no analytic derivatives; use deriv_x")
        if alpha.order > self.max_taylor_order:
            raise KernelError(f"|alpha|={alpha.order} exceeds max_taylor_order={self.max_taylor_order}")
        q = np.sum(z * z, axis=-1)
        if (self.singular or self.kink_at_origin) and np.any(q == 0):
            raise KernelError("derivative requested on the singular diagonal x = y")
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            g = self.gq(q, alpha.order)
            out = np.zeros_like(q)
            for nb, coef, expo in _hermite_terms(alpha.entries):
                term = coef * g[alpha.order - nb]
                for i, e in enumerate(expo):
                    if e:
                        term = term * z[..., i] ** e
                out = out + term
        if self.clamp is not None:
            out = np.where(np.abs(self.gq(q, 0)[0]) > self.clamp, 0.0, out)
        return out

    def deriv(self, alpha, x, y) -> np.ndarray:
        x, y = self._points(x), self._points(y)
        return self.deriv_profile(alpha, x - y)

    def sup_deriv_ball(self, m: int, y) -> np.ndarray:
        """max over |alpha| = m and a fixed design of x in B_1 of |d^alpha_x K(x, y)|.

        The design is 16 uniform points on [-1, 1] (n = 1) or the center plus
        four rings of eight points (n = 2). The point of the closed ball
        nearest to y is added, which makes the maximum exact along the
        profile for power-type kernels whose derivatives decrease with |z|.
        """
        y = self._points(y)
        design = _ball_design(self.dim)
        ny = np.linalg.norm(y, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            nearest = np.where(ny > 0, y / np.maximum(ny, 1e-300), 0.0)
        best = np.zeros(y.shape[:-1])
        alphas = [a for a in _indices_of_order(self.dim, m)]
        for alpha in alphas:
            for xd in design:
                best = np.maximum(best, np.abs(self._deriv_any(alpha, xd[None, :] if y.ndim > 1 else xd, y)))
            best = np.maximum(best, np.abs(self._deriv_any(alpha, nearest, y)))
        return best

    def _deriv_any(self, alpha, x, y):
        if self.gq is not None:
            return self.deriv(alpha, x, y)
        return deriv_fd(self, alpha, x, y)[0]

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "symmetric_in_z": self.symmetric_in_z,
            "nonnegative": self.nonnegative,
            "singularity_order": self.singularity_order,
            "admissible_theta": str(self.admissible_theta),
            "max_taylor_order": self.max_taylor_order,
            "tail_decay": "inf" if math.isinf(self.tail_decay) else self.tail_decay,
            "translation_invariant": self.translation_invariant,
            "spec": None if self.spec is None else self.spec.to_dict(),
        }


def _indices_of_order(n: int, m: int) -> list[MultiIndex]:
    from .multiindex import _compositions

    return [MultiIndex(e) for e in _compositions(m, n)]


@lru_cache(maxsize=None)
def _ball_design_cached(n: int) -> tuple:
    if n == 1:
        return tuple((float(t),) for t in np.linspace(-1, 1, 16))
    pts = [(0.0, 0.0)]
    for rad in (0.25, 0.5, 0.75, 1.0):
        for k in range(8):
            ang = 2 * math.pi * k / 8
            pts.append((rad * math.cos(ang), rad * math.sin(ang)))
    return tuple(pts)


def _ball_design(n: int) -> np.ndarray:
    return np.array(_ball_design_cached(n))


# ---------------------------------------------------------------------------
# construction


def build(spec: KernelSpec) -> Kernel:
    """Construct the kernel described by ``spec``."""
    n = spec.dim
    name = spec.name
    clamp = None if spec.eps is None else 1.0 / spec.eps
    bounded = ThetaRange(0.0, 2.0, lo_open=False)
    common = dict(dim=n, symmetric_in_z=True, spec=spec, clamp=clamp)

    if name == "gauss":
        def gq(q, j):
            e = np.exp(-q)
            return [(-1) ** i * e for i in range(j + 1)]
        kern = Kernel(name=name, nonnegative=True, singularity_order=0.0, admissible_theta=bounded,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=math.inf, gq=gq, **common)
    elif name == "abel":
        def hd(r, j):
            e = np.exp(-r)
            return [(-1) ** i * e for i in range(j + 1)]
        kern = Kernel(name=name, nonnegative=True, singularity_order=0.0, admissible_theta=bounded,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=math.inf,
                      gq=lambda q, j: _from_r_profile(hd, q, j), kink_at_origin=True, **common)
    elif name == "morse":
        def hd(r, j):
            a, b = np.exp(-2 * (r - 1)), np.exp(-(r - 1))
            return [(-2.0) ** i * a - (-1.0) ** i * b for i in range(j + 1)]
        kern = Kernel(name=name, nonnegative=False, singularity_order=0.0, admissible_theta=bounded,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=math.inf,
                      gq=lambda q, j: _from_r_profile(hd, q, j), kink_at_origin=True, **common)
    elif name == "buckingham":
        def hd(r, j):
            e = np.exp(-r)
            return [(-1) ** i * e for i in range(j + 1)]

        def gq(q, j):
            ex = _from_r_profile(hd, q, j)
            pw = _power_q(q, -3.0, j)
            return [a - b for a, b in zip(ex, pw)]
        order = 0.0 if clamp is not None else 6.0
        theta = bounded if clamp is not None else ThetaRange(6.0 - n, 2.0)
        kern = Kernel(name=name, nonnegative=False, singularity_order=order, admissible_theta=theta,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=6.0, gq=gq, kink_at_origin=True,
                      power_like=True, **common)
    elif name == "mollifier":
        kern = Kernel(name=name, nonnegative=True, singularity_order=0.0, admissible_theta=bounded,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=math.inf, gq=_mollifier_q, **common)
    else:
        s = float(spec.s)
        p = n + 2 * s
        scale = frac_lap_constant(n, s) if spec.normalized else 1.0
        lam, Lam = spec.lam * scale, (spec.Lam if name == "frac_lap_comparable" else spec.lam) * scale
        if name == "frac_lap":
            def gq(q, j):
                return [lam * d for d in _power_q(q, -p / 2, j)]
        else:
            def gq(q, j):
                base = _power_q(q, -p / 2, j)
                with np.errstate(divide="ignore"):
                    inv = [(-1) ** k * math.factorial(k) * (1 + q) ** (-1 - k) for k in range(j + 1)]
                out = []
                for jj in range(j + 1):
                    mix = sum(math.comb(jj, i) * base[i] * inv[jj - i] for i in range(jj + 1))
                    out.append(lam * base[jj] + (Lam - lam) * mix)
                return out
        order = 0.0 if clamp is not None else p
        theta = bounded if clamp is not None else ThetaRange(2 * s, 2.0)
        kern = Kernel(name=name, nonnegative=True, singularity_order=order, admissible_theta=theta,
                      max_taylor_order=MAX_ANALYTIC_ORDER, tail_decay=p, gq=gq, power_like=True, **common)
    return kern


def callback_kernel(func: Callable, dim: int = 1, *, name: str = "callback", symmetric_in_z: bool = False,
                    nonnegative: bool = False, singularity_order: float = 0.0, tail_decay: float = math.inf,
                    translation_invariant: bool = False) -> Kernel:
    """Wrap a user function ``func(x, y)`` (points of shape (..., n)) as a kernel.

    Derivatives use finite differences and are limited to order two.
    """
    theta = ThetaRange(max(singularity_order - dim, 0.0), 2.0, lo_open=singularity_order > dim)
    return Kernel(dim=dim, name=name, symmetric_in_z=symmetric_in_z, nonnegative=nonnegative,
                  singularity_order=singularity_order, admissible_theta=theta, max_taylor_order=FD_MAX_ORDER,
                  tail_decay=tail_decay, func=func, translation_invariant=translation_invariant)


# ---------------------------------------------------------------------------
# derivatives


def _central_difference(fun, x: np.ndarray, alpha: tuple[int, ...], h: float) -> np.ndarray:
    """Iterated central difference of order alpha with step h (O(h^2))."""
    n = len(alpha)
    offsets = [[(a / 2 - k, (-1) ** k * math.comb(a, k)) for k in range(a + 1)] for a in alpha]
    acc = 0.0
    for combo in product(*offsets):
        shift = np.array([c[0] for c in combo]) * h
        w = math.prod(c[1] for c in combo)
        acc = acc + w * fun(x + shift.reshape((1,) * (x.ndim - 1) + (n,)))
    return acc / h ** sum(alpha)


def deriv_fd(K: Kernel, alpha, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference d^alpha_x K(x, y) with two Richardson levels.

    The base step ``eps^(1/(|alpha|+6)) (1 + |x|)`` balances round-off against
    the O(h^6) truncation left after extrapolation. Returns (value, error estimate).
    """
    alpha = _as_index(alpha)
    x, y = K._points(x), K._points(y)
    x, y = np.broadcast_arrays(x, y)
    if alpha.order == 0:
        v = K(x, y)
        return v, np.zeros_like(v)
    h = np.finfo(float).eps ** (1.0 / (alpha.order + 6)) * (1 + float(np.max(np.linalg.norm(x, axis=-1))))
    fun = lambda xx: K(xx, y)  # noqa: E731
    d1 = _central_difference(fun, x, alpha.entries, h)
    d2 = _central_difference(fun, x, alpha.entries, h / 2)
    d3 = _central_difference(fun, x, alpha.entries, h / 4)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d3 - d2) / 3
    r = (16 * r2 - r1) / 15
    return r, np.abs(r - r2)


def deriv_x(K: Kernel, alpha, x, y, *, with_error: bool = False):
    """d^alpha_x K(x, y): analytic for built-in kernels, finite differences otherwise."""
    alpha = _as_index(alpha)
    if alpha.order > K.max_taylor_order:
        raise KernelError(f"|alpha|={alpha.order} exceeds max_taylor_order={K.max_taylor_order}")
    if K.gq is not None:
        val = K.deriv(alpha, x, y)
        return (val, np.zeros_like(val)) if with_error else val
    xx, yy = K._points(x), K._points(y)
    if K.singular and np.any(np.all(xx == yy, axis=-1)):
        raise KernelError("derivative requested on the singular diagonal x = y")
    val, err = deriv_fd(K, alpha, x, y)
    return (val, err) if with_error else val


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisReport:
    kernel: str
    theta: float
    m: int
    local_integral_values: list[float]
    local_integral_converged: bool
    theta_claimed_admissible: bool
    symmetry_residual: float
    sign_violations: int
    sign_witness: tuple[list[float], list[float]] | None
    passed: bool
    diagnostics: list[str]

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "theta": self.theta,
            "m": self.m,
            "local_integral_values": self.local_integral_values,
            "local_integral_converged": self.local_integral_converged,
            "theta_claimed_admissible": self.theta_claimed_admissible,
            "symmetry_residual": self.symmetry_residual,
            "sign_violations": self.sign_violations,
            "sign_witness": None if self.sign_witness is None else {"x": self.sign_witness[0],
                                                                     "y": self.sign_witness[1]},
            "status": "PASS" if self.passed else "FAIL",
            "diagnostics": self.diagnostics,
        }


def _radial_local_integral(K: Kernel, theta: float, cfg: QuadConfig) -> tuple[float, bool, str]:
    """int min(|z|^theta, 1) |k(z)| dz for translation-invariant radial kernels."""
    n = K.dim
    surf = sphere_measure(n)

    def radial(rho):
        z = np.zeros((rho.size, n))
        z[:, 0] = rho
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return surf * rho ** (n - 1) * np.minimum(rho ** theta, 1.0) * np.abs(K.profile(z))

    near = pv_shells(lambda a, b: gk_interval(radial, a, b, cfg), 1.0, cfg, min_shells=8)
    diag = near.diagnostic
    try:
        far = integrate_tail(lambda y: np.abs(K.profile(y)), 1.0, 0.0, K.tail_decay, cfg, n=n)
    except DivergentIntegralError as exc:
        return math.inf, False, str(exc)
    return float(near.value + far.value), near.converged and far.converged, diag or far.diagnostic


def validate_hypotheses(K: Kernel, theta: float, m: int, sample_budget: int = 200, *,
                        cfg: QuadConfig | None = None, seed: int = 0) -> HypothesisReport:
    """Spot-check local integrability, symmetry and sign of ``K``.

    The local-integrability integral is computed through dyadic shells;
    shells that stop decaying flag divergence. Symmetry and sign are checked
    on ``sample_budget`` seeded random samples with x in the unit ball.
    """
    if not 0 <= theta <= 2:
        raise KernelError("theta must lie in [0, 2]")
    cfg = cfg or QuadConfig()
    rng = np.random.default_rng(seed)
    n = K.dim
    diagnostics: list[str] = []

    xs = _sample_ball(rng, n, sample_budget, 1.0)
    zs = _sample_ball(rng, n, sample_budget, 1.0)
    zs = zs[np.linalg.norm(zs, axis=1) > 1e-3]
    xs_z = xs[: zs.shape[0]]
    kp, km = K(xs_z, xs_z + zs), K(xs_z, xs_z - zs)
    sym = float(np.max(np.abs(kp - km) / (1 + np.abs(kp)))) if kp.size else 0.0

    # sign: y spread over |y - x| in (0, 10)
    dirs = _sample_ball(rng, n, sample_budget, 1.0)
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-12)
    radii = np.geomspace(1e-2, 10, sample_budget)
    ys = xs + radii[:, None] * dirs
    kv = K(xs, ys)
    neg = np.nonzero(kv < 0)[0]
    witness = None
    if neg.size:
        i = int(neg[0])
        witness = (xs[i].tolist(), ys[i].tolist())
        diagnostics.append(f"kernel negative at {neg.size} samples")

    if K.translation_invariant:
        val, ok, diag = _radial_local_integral(K, theta, cfg)
        values = [val]
    else:
        values, ok, diag = [], True, ""
        for x in xs[: min(8, xs.shape[0])]:
            def f(y, x=x):
                d = np.linalg.norm(y - x, axis=-1)
                return np.minimum(d ** theta, 1.0) * np.abs(K(x, y))
            res = integrate_tail(f, 0.0 + 1e-8, 0.0, K.tail_decay if K.tail_decay > n else math.inf,
                                 cfg, n=n, center=x)
            values.append(float(res.value))
            ok &= res.converged
    if diag:
        diagnostics.append(diag)
    claimed = K.admissible_theta.contains(theta)
    if not ok:
        diagnostics.append(f"local integrability fails for theta={theta}")
    sign_ok = (neg.size == 0) if K.nonnegative else True
    if K.nonnegative and neg.size:
        diagnostics.append("kernel declared nonnegative but negative samples found")
    sym_ok = sym <= 1e-12 if K.symmetric_in_z else True
    passed = bool(ok and sym_ok and sign_ok and math.isfinite(values[0] if values else 0.0))
    return HypothesisReport(K.name, theta, m, [float(v) for v in values], bool(ok), claimed, sym,
                            int(neg.size), witness, passed, diagnostics)


def _sample_ball(rng: np.random.Generator, n: int, k: int, radius: float) -> np.ndarray:
    g = rng.standard_normal((k, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(k) ** (1.0 / n)
    return g * r[:, None]
