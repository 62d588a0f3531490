"""Scalar fields u: R^n -> R, an expression language for them, and a builtin catalog."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .multiindex import enumerate_multi_indices
from .quadrature import Annulus, DivergentIntegralError, QuadConfig, integrate_region, integrate_tail

__all__ = [
    "BUILTIN_NAMES",
    "BinOp",
    "Call",
    "ExprDomainError",
    "ExprSyntaxError",
    "MembershipReport",
    "Neg",
    "Norm",
    "Num",
    "ScalarField",
    "Var",
    "builtin",
    "check_membership",
    "compile_expr",
    "estimate_growth",
    "holder_quotient",
    "parse",
    "resolve_function",
    "to_source",
]


class ExprSyntaxError(ValueError):
    """Malformed expression; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, src: str = ""):
        super().__init__(f"{message} at offset {offset}" + (f": {src!r}" if src else ""))
        self.offset = offset


class ExprDomainError(ArithmeticError):
    """Evaluation left the domain of an operation (division by zero, log of a non-positive number...)."""


# ---------------------------------------------------------------------------
# scalar fields


def _as_points(x, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    scalar = False
    if n == 1:
        if x.ndim == 0:
            x, scalar = x.reshape(1, 1), True
        elif x.shape[-1] != 1 or x.ndim == 1:
            x = x[..., None]
    else:
        if x.ndim == 1:
            x, scalar = x[None, :], True
    if x.shape[-1] != n:
        raise ValueError(f"points have dimension {x.shape[-1]}, expected {n}")
    return x, scalar


@dataclass(frozen=True)
class ScalarField:
    """A function u on R^n with metadata.

    ``func`` maps points of shape ``(P, n)`` to values of shape ``(P,)``.
    ``theta_class`` is the claimed regularity on B_4, ``growth_exponent`` a
    g with ``|u(y)| <= C (1 + |y|)^g``, ``support_radius`` a radius outside
    of which u vanishes. ``breakpoints`` lists where u may fail to be smooth:
    abscissae for n = 1, radii for n = 2.
    """

    dim: int
    func: Callable = field(repr=False, compare=False)
    gradient: Callable | None = field(default=None, repr=False, compare=False)
    theta_class: float = 2.0
    growth_exponent: float | None = None
    support_radius: float | None = None
    breakpoints: tuple[float, ...] = ()
    name: str = "u"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("fields are supported for n in {1, 2}")
        if not 0 <= self.theta_class <= 2:
            raise ValueError("theta_class must lie in [0, 2]")
        object.__setattr__(self, "breakpoints", tuple(sorted(set(float(b) for b in self.breakpoints))))

    def __call__(self, x):
        pts, scalar = _as_points(x, self.dim)
        lead = pts.shape[:-1]
        vals = np.asarray(self.func(pts.reshape(-1, self.dim)), dtype=float)
        vals = np.broadcast_to(vals, (int(np.prod(lead)),)).reshape(lead)
        return float(vals.reshape(-1)[0]) if scalar else vals

    def grad(self, x) -> np.ndarray:
        """Gradient, analytic when provided, else central differences."""
        pts, scalar = _as_points(x, self.dim)
        if self.gradient is not None:
            g = np.asarray(self.gradient(pts), dtype=float)
        else:
            h = np.finfo(float).eps ** (1 / 3) * (1 + np.abs(pts))
            cols = []
            for i in range(self.dim):
                e = np.zeros(self.dim)
                e[i] = 1.0
                cols.append((self(pts + h[..., i:i + 1] * e) - self(pts - h[..., i:i + 1] * e)) / (2 * h[..., i]))
            g = np.stack(cols, axis=-1)
        return g[0] if scalar else g

    # combinators -------------------------------------------------------
    def with_meta(self, **kw) -> "ScalarField":
        return replace(self, **kw)

    def restrict(self, r_inner: float = 0.0, r_outer: float = math.inf, name: str | None = None) -> "ScalarField":
        """u times the indicator of ``r_inner <= |x| < r_outer``."""
        base = self.func

        def f(p):
            r = np.linalg.norm(p, axis=-1)
            mask = (r >= r_inner) & (r < r_outer)
            out = np.zeros(p.shape[0])
            if np.any(mask):
                out[mask] = base(p[mask])
            return out

        new_bp = list(self.breakpoints)
        for rad in (r_inner, r_outer):
            if 0 < rad < math.inf:
                new_bp.extend([rad, -rad] if self.dim == 1 else [rad])
        support = self.support_radius if r_outer == math.inf else min(r_outer, self.support_radius or math.inf)
        theta = self.theta_class if r_inner >= 4 or r_inner == 0 else 0.0
        return replace(self, func=f, gradient=None, support_radius=support, breakpoints=tuple(new_bp),
                       theta_class=theta if r_outer > 4 else 0.0,
                       name=name or f"{self.name}*1[{r_inner:g},{r_outer:g})")

    def times(self, weight: Callable, *, support_radius: float | None = None,
              breakpoints: Sequence[float] = (), name: str | None = None) -> "ScalarField":
        """Pointwise product with ``weight`` (points (P, n) -> (P,))."""
        base = self.func

        def f(p):
            w = np.asarray(weight(p), dtype=float)
            out = np.zeros(p.shape[0])
            nz = w != 0
            if np.any(nz):
                out[nz] = w[nz] * base(p[nz])
            return out

        sup = support_radius if self.support_radius is None else min(self.support_radius, support_radius or math.inf)
        return replace(self, func=f, gradient=None, support_radius=sup,
                       breakpoints=tuple(self.breakpoints) + tuple(breakpoints), name=name or f"w*{self.name}")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        fa, fb = self.func, other.func
        g = None
        if self.gradient is not None and other.gradient is not None:
            ga, gb = self.gradient, other.gradient
            g = lambda p: ga(p) + gb(p)  # noqa: E731
        growth = None
        if self.growth_exponent is not None and other.growth_exponent is not None:
            growth = max(self.growth_exponent, other.growth_exponent)
        sup = None
        if self.support_radius is not None and other.support_radius is not None:
            sup = max(self.support_radius, other.support_radius)
        return ScalarField(self.dim, lambda p: fa(p) + fb(p), g, min(self.theta_class, other.theta_class), growth,
                           sup, self.breakpoints + other.breakpoints, f"({self.name}+{other.name})")

    def scaled(self, c: float) -> "ScalarField":
        fa = self.func
        g = None if self.gradient is None else (lambda p, ga=self.gradient: c * ga(p))
        return replace(self, func=lambda p: c * fa(p), gradient=g, name=f"{c:g}*{self.name}")

    def tail_growth(self) -> float:
        """Growth exponent usable for tail integrals (-inf for compact support)."""
        if self.support_radius is not None:
            return -math.inf
        if self.growth_exponent is None:
            return estimate_growth(self)
        return self.growth_exponent

    def metadata(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "theta_class": self.theta_class,
            "growth_exponent": self.growth_exponent,
            "support_radius": self.support_radius,
            "breakpoints": list(self.breakpoints),
        }


def estimate_growth(u: ScalarField, radii: Sequence[float] = (1e2, 1e3, 1e4, 1e5)) -> float:
    """Sampled growth exponent from log|u| against log r at large radii, rounded up."""
    n = u.dim
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    mags = []
    for r in radii:
        with np.errstate(all="ignore"):
            v = np.abs(u(dirs * r))
        mags.append(float(np.max(v)) if np.all(np.isfinite(v)) else math.inf)
    if all(m == 0 for m in mags):
        return -math.inf
    if any(math.isinf(m) for m in mags):
        return math.inf
    logs = np.log(np.maximum(mags, 1e-300))
    slopes = np.diff(logs) / np.diff(np.log(radii))
    g = float(np.max(slopes[-2:]))
    return math.ceil(g * 100 - 1e-9) / 100 + 0.01 if g > -50 else -math.inf


# ---------------------------------------------------------------------------
# expression AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Norm:
    pass


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_FUNCS = {
    "exp": (1, 1), "log": (1, 1), "abs": (1, 1), "sqrt": (1, 1), "sin": (1, 1), "cos": (1, 1),
    "min": (2, 64), "max": (2, 64), "indicator": (2, 3),
}
_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf}

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


def _tokenize(src: str):
    pos = 0
    toks = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            skip = len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[pos + skip]!r}", len(src[:pos + skip].encode()), src)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    toks.append(("end", "", len(src.encode())))
    return toks


class _Parser:
    def __init__(self, src: str, n: int):
        self.src = src
        self.n = n
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ExprSyntaxError(f"expected {value!r}, found {t[1] or 'end of input'!r}", t[2], self.src)
        return t

    def parse(self):
        if not self.src.strip():
            raise ExprSyntaxError("empty expression", 0, self.src)
        node = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ExprSyntaxError(f"unexpected token {t[1]!r}", t[2], self.src)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if self.peek()[1] == "(":
                if val not in _FUNCS:
                    raise ExprSyntaxError(f"unknown function {val!r}", off, self.src)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                lo, hi = _FUNCS[val]
                if not lo <= len(args) <= hi:
                    raise ExprSyntaxError(f"{val} takes {lo}..{hi} arguments, got {len(args)}", off, self.src)
                return Call(val, tuple(args))
            if val in _CONSTS:
                return Num(_CONSTS[val])
            if val == "r":
                return Norm()
            if val == "x" and self.n == 1:
                return Var("x1")
            m = re.fullmatch(r"x(\d+)", val)
            if m and 1 <= int(m.group(1)) <= self.n:
                return Var(val)
            raise ExprSyntaxError(f"unknown identifier {val!r}", off, self.src)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", off, self.src)


def parse(src: str, n: int = 1):
    """Parse an expression in the coordinates ``x1..xn`` (``x`` when n = 1) and ``r = |x|``.

    Supports ``+ - * / ^`` (``^`` right-associative, binding tighter than
    unary minus), parentheses, ``exp log abs sqrt sin cos min max`` and
    ``indicator(lo, hi)`` (1 when ``lo <= |x| < hi``) or
    ``indicator(expr, lo, hi)``. Constants ``pi``, ``e`` and ``inf``.
    """
    return _Parser(src, n).parse()


def to_source(node) -> str:
    """Canonical text form; reparses to an equal tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Norm):
        return "r"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _eval(node, pts: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(pts.shape[0], node.value)
    if isinstance(node, Var):
        return pts[:, int(node.name[1:]) - 1]
    if isinstance(node, Norm):
        return np.linalg.norm(pts, axis=1)
    if isinstance(node, Neg):
        return -_eval(node.operand, pts)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, pts), _eval(node.right, pts)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise ExprDomainError("division by zero")
            return a / b
        if np.any((a < 0) & (b != np.round(b))):
            raise ExprDomainError("non-integer power of a negative number")
        if np.any((a == 0) & (b < 0)):
            raise ExprDomainError("negative power of zero")
        return a ** b
    if isinstance(node, Call):
        args = [_eval(a, pts) for a in node.args]
        name = node.name
        if name == "exp":
            return np.exp(args[0])
        if name == "log":
            if np.any(args[0] <= 0):
                raise ExprDomainError("log of a non-positive number")
            return np.log(args[0])
        if name == "sqrt":
            if np.any(args[0] < 0):
                raise ExprDomainError("sqrt of a negative number")
            return np.sqrt(args[0])
        if name == "abs":
            return np.abs(args[0])
        if name == "sin":
            return np.sin(args[0])
        if name == "cos":
            return np.cos(args[0])
        if name == "min":
            return np.minimum.reduce(args)
        if name == "max":
            return np.maximum.reduce(args)
        if name == "indicator":
            if len(args) == 2:
                v, lo, hi = np.linalg.norm(pts, axis=1), args[0], args[1]
            else:
                v, lo, hi = args
            return ((v >= lo) & (v < hi)).astype(float)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node, pts: np.ndarray) -> np.ndarray:
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            return _eval(node, pts)
    except FloatingPointError as exc:
        raise ExprDomainError(str(exc)) from exc


def _collect_breaks(node, n: int) -> list[float]:
    out: list[float] = []
    if isinstance(node, Call):
        if node.name == "indicator" and all(isinstance(a, Num) for a in node.args[-2:]):
            for a in node.args[-2:]:
                v = a.value
                if math.isfinite(v) and (len(node.args) == 2 and v > 0):
                    out.extend([v, -v] if n == 1 else [v])
                elif math.isfinite(v) and len(node.args) == 3 and n == 1:
                    out.append(v)
        if node.name in ("abs", "min", "max", "sqrt") or (node.name == "indicator" and len(node.args) == 3):
            out.append(0.0)
        for a in node.args:
            out.extend(_collect_breaks(a, n))
    elif isinstance(node, Norm):
        out.append(0.0)
    elif isinstance(node, (BinOp,)):
        out.extend(_collect_breaks(node.left, n) + _collect_breaks(node.right, n))
    elif isinstance(node, Neg):
        out.extend(_collect_breaks(node.operand, n))
    return out


def _finite_support(node) -> float | None:
    """Radius R with node = 0 outside B_R, when a factor is an indicator(lo, hi) with finite hi."""
    if isinstance(node, Call) and node.name == "indicator" and len(node.args) == 2:
        hi = node.args[1]
        if isinstance(hi, Num) and math.isfinite(hi.value):
            return hi.value
    if isinstance(node, BinOp) and node.op == "*":
        a, b = _finite_support(node.left), _finite_support(node.right)
        vals = [v for v in (a, b) if v is not None]
        return min(vals) if vals else None
    if isinstance(node, BinOp) and node.op == "/":
        return _finite_support(node.left)
    if isinstance(node, Neg):
        return _finite_support(node.operand)
    return None


def compile_expr(src: str, n: int = 1, *, theta_class: float = 2.0,
                 growth_exponent: float | None = None) -> ScalarField:
    """Parse ``src`` into a :class:`ScalarField` with inferred breakpoints and support."""
    node = parse(src, n)
    field_ = ScalarField(n, lambda p: evaluate(node, p), None, theta_class, growth_exponent,
                         _finite_support(node), tuple(_collect_breaks(node, n)), name=to_source(node))
    if growth_exponent is None and field_.support_radius is None:
        try:
            field_ = replace(field_, growth_exponent=estimate_growth(field_))
        except ExprDomainError:
            pass
    return field_


# ---------------------------------------------------------------------------
# builtins


def _bump_values(p, radius, height):
    r2 = np.sum(p * p, axis=1) / radius ** 2
    out = np.zeros(p.shape[0])
    inside = r2 < 1
    out[inside] = height * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _bump_grad(p, radius, height):
    r2 = np.sum(p * p, axis=1) / radius ** 2
    out = np.zeros_like(p)
    inside = r2 < 1
    w = 1.0 - r2[inside]
    val = height * np.exp(1.0 - 1.0 / w)
    out[inside] = (-2.0 * val / (w * w) / radius ** 2)[:, None] * p[inside]
    return out


BUILTIN_NAMES = ("constant", "coordinate", "monomial", "bump", "counterexample_uk", "getoor",
                 "indicator_annulus", "logramp_uk", "exp_abs")


def builtin(name: str, params: dict | None = None, n: int = 1) -> ScalarField:
    """Construct a catalog function.

    * ``constant(c)``: u = c.
    * ``coordinate(i)``: u = x_i.
    * ``monomial(a1, ..., an)``: u = x^alpha.
    * ``bump(radius, height)``: smooth bump ``height * exp(1 - 1/(1 - |x/radius|^2))``.
    * ``counterexample_uk(k)``: ``k x`` for ``x > k``, zero otherwise (n = 1).
    * ``getoor(s)``: ``(1 - |x|^2)_+^s``.
    * ``indicator_annulus(lo, hi)``: 1 on ``lo <= |x| < hi``.
    * ``logramp_uk(k, s)``: ``-x^(2s) / log k`` on ``(k, k^2)``, zero elsewhere (n = 1).
    * ``exp_abs``: ``exp(-|x|)``.
    """
    p = dict(params or {})
    known = {
        "constant": {"c"}, "coordinate": {"i"}, "monomial": {f"a{i}" for i in range(1, n + 1)} | {"a"},
        "bump": {"radius", "height"}, "counterexample_uk": {"k"}, "getoor": {"s"},
        "indicator_annulus": {"lo", "hi"}, "logramp_uk": {"k", "s"}, "exp_abs": set(),
    }
    if name not in known:
        raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    bad = set(p) - known[name]
    if bad:
        raise ValueError(f"unknown parameters for {name}: {sorted(bad)}")
    label = name + ("(" + ", ".join(f"{k}={p[k]:g}" for k in sorted(p)) + ")" if p else "")

    if name == "constant":
        c = float(p.get("c", 1.0))
        return ScalarField(n, lambda x: np.full(x.shape[0], c), lambda x: np.zeros_like(x), 2.0,
                           0.0, 0.0 if c == 0 else None, (), label)
    if name == "coordinate":
        i = int(p.get("i", 1))
        if not 1 <= i <= n:
            raise ValueError(f"coordinate index {i} out of range for n={n}")
        e = np.eye(n)[i - 1]
        return ScalarField(n, lambda x: x[:, i - 1].copy(), lambda x: np.broadcast_to(e, x.shape).copy(),
                           2.0, 1.0, None, (), label)
    if name == "monomial":
        if n == 1:
            alpha = (int(p.get("a1", p.get("a", 1))),)
        else:
            alpha = tuple(int(p.get(f"a{i}", 0)) for i in range(1, n + 1))
        if any(a < 0 for a in alpha):
            raise ValueError("monomial exponents must be nonnegative")

        def mono(x):
            out = np.ones(x.shape[0])
            for i, a in enumerate(alpha):
                out = out * x[:, i] ** a
            return out
        return ScalarField(n, mono, None, 2.0, float(sum(alpha)), None, (), label)
    if name == "bump":
        radius, height = float(p.get("radius", 1.0)), float(p.get("height", 1.0))
        if radius <= 0:
            raise ValueError("bump radius must be positive")
        return ScalarField(n, lambda x: _bump_values(x, radius, height), lambda x: _bump_grad(x, radius, height),
                           2.0, 0.0, radius, (), label)
    if name == "counterexample_uk":
        if n != 1:
            raise ValueError("counterexample_uk is one-dimensional")
        k = float(p.get("k", 10))
        if k <= 1:
            raise ValueError("counterexample_uk needs k > 1")
        return ScalarField(1, lambda x: np.where(x[:, 0] > k, k * x[:, 0], 0.0), None, 2.0, 1.0, None, (k,), label)
    if name == "getoor":
        s = float(p.get("s", 0.5))
        if not 0 < s < 1:
            raise ValueError("getoor needs 0 < s < 1")

        def gt(x):
            w = 1.0 - np.sum(x * x, axis=1)
            return np.where(w > 0, np.maximum(w, 0.0) ** s, 0.0)
        bps = (-1.0, 1.0) if n == 1 else (1.0,)
        return ScalarField(n, gt, None, s, 0.0, 1.0, bps, label)
    if name == "indicator_annulus":
        lo, hi = float(p.get("lo", 0.0)), float(p.get("hi", 1.0))
        if not 0 <= lo < hi:
            raise ValueError("indicator_annulus needs 0 <= lo < hi")

        def ind(x):
            r = np.linalg.norm(x, axis=1)
            return ((r >= lo) & (r < hi)).astype(float)
        bps = [b for v in (lo, hi) if 0 < v < math.inf for b in ((v, -v) if n == 1 else (v,))]
        theta = 2.0 if lo >= 4 or (lo == 0 and hi >= 4) else 0.0
        return ScalarField(n, ind, None, theta, 0.0, hi if math.isfinite(hi) else None, tuple(bps), label)
    if name == "logramp_uk":
        if n != 1:
            raise ValueError("logramp_uk is one-dimensional")
        k, s = float(p.get("k", 10)), float(p.get("s", 0.5))
        if k <= 1:
            raise ValueError("logramp_uk needs k > 1")
        lk = math.log(k)

        def fu(x):
            y = x[:, 0]
            inside = (y > k) & (y < k * k)
            return np.where(inside, -np.abs(y) ** (2 * s) / lk, 0.0)
        return ScalarField(1, fu, None, 2.0, 2 * s, k * k, (k, k * k), label)
    # exp_abs
    return ScalarField(n, lambda x: np.exp(-np.linalg.norm(x, axis=1)), None, 1.0, 0.0, None, (0.0,), label)


_CALL_SYNTAX = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def resolve_function(src: str, n: int = 1) -> ScalarField:
    """Builtin call syntax ``name(k=10, s=0.5)`` or an expression string."""
    m = _CALL_SYNTAX.match(src)
    if m and m.group(1) in BUILTIN_NAMES:
        params = {}
        body = (m.group(2) or "").strip()
        if body:
            for part in body.split(","):
                if "=" not in part:
                    raise ValueError(f"builtin parameters must be key=value, got {part.strip()!r}")
                k, v = part.split("=", 1)
                params[k.strip()] = float(v)
        return builtin(m.group(1), params, n)
    return compile_expr(src, n)


# ---------------------------------------------------------------------------
# membership checks


@dataclass
class MembershipReport:
    m: int
    R_probe: float
    annulus_values: list[float]
    annulus_ok: bool
    tail_value: float
    tail_ok: bool
    growth_exponent: float
    diagnostics: list[str]

    @property
    def passed(self) -> bool:
        return self.annulus_ok and self.tail_ok

    def to_dict(self) -> dict:
        fin = lambda v: v if math.isfinite(v) else str(v)  # noqa: E731
        return {
            "m": self.m,
            "R_probe": self.R_probe,
            "annulus_values": [fin(v) for v in self.annulus_values],
            "annulus_ok": self.annulus_ok,
            "tail_value": fin(self.tail_value),
            "tail_ok": self.tail_ok,
            "growth_exponent": fin(self.growth_exponent),
            "status": "PASS" if self.passed else "FAIL",
            "diagnostics": self.diagnostics,
        }


def _sample_x(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[-0.9], [0.0], [0.9]])
    return np.array([[0.0, 0.0], [0.9, 0.0], [0.0, -0.9]])


def check_membership(u: ScalarField, K, m: int, R_probe: float = 10.0,
                     cfg: QuadConfig | None = None) -> MembershipReport:
    """Estimate the annulus integrals and the tail integral that admit ``u`` for order ``m``.

    Annulus: sum over |alpha| <= m-1 of int_{3<|y|<R} |u| |d^alpha_x K(x, y)| dy at
    a few x in B_1. Tail: int_{|y|>3} |u(y)| sup_{|alpha|=m, x in B_1}
    |d^alpha_x K(x, y)| dy, refused (FAIL) when the growth and decay
    exponents leave no integrability margin.
    """
    cfg = cfg or QuadConfig()
    if m > K.max_taylor_order:
        raise ValueError(f"m={m} exceeds the kernel's max_taylor_order={K.max_taylor_order}")
    if R_probe <= 3:
        raise ValueError("R_probe must exceed 3")
    n = u.dim
    diags: list[str] = []
    growth = u.tail_growth()
    breaks = [abs(b) for b in u.breakpoints if 3 < abs(b) < R_probe]
    annulus_vals: list[float] = []
    annulus_ok = True
    alphas = enumerate_multi_indices(n, m - 1)
    for x in _sample_x(n):
        if not alphas:
            annulus_vals.append(0.0)
            continue

        def integrand(y, x=x):
            uy = np.abs(u(y))
            acc = np.zeros(y.shape[0])
            for a in alphas:
                acc = acc + np.abs(K.deriv(a, x[None, :], y) if K.gq is not None else K(x[None, :], y))
            return uy * acc

        res = integrate_region(integrand, Annulus(tuple(np.zeros(n)), 3.0, R_probe), cfg, radial_breaks=breaks)
        annulus_vals.append(float(res.value))
        if not (res.converged and math.isfinite(res.value)):
            annulus_ok = False
            diags.append(f"annulus integral unresolved at x={x.tolist()}: {res.diagnostic}")

    if u.support_radius is not None and u.support_radius <= 3:
        mval, mok = 0.0, True
    else:
        decay = K.deriv_decay(m)
        g = 0.0 if growth == -math.inf else growth
        try:
            res = integrate_tail(lambda y: np.abs(u(y)) * K.sup_deriv_ball(m, y), 3.0, g, decay, cfg, n=n,
                                 radial_breaks=[abs(b) for b in u.breakpoints if abs(b) > 3])
            mval, mok = float(res.value), bool(res.converged and math.isfinite(res.value))
            if not mok:
                diags.append(f"tail integral unresolved: {res.diagnostic}")
        except DivergentIntegralError as exc:
            mval, mok = math.inf, False
            diags.append(str(exc))
    return MembershipReport(m, R_probe, annulus_vals, annulus_ok, mval, mok, growth, diags)


def holder_quotient(u: ScalarField, exponent: float, points_a, points_b) -> float:
    """max |u(a) - u(b)| / |a - b|^exponent over paired samples."""
    a, _ = _as_points(points_a, u.dim)
    b, _ = _as_points(points_b, u.dim)
    d = np.linalg.norm(a - b, axis=-1)
    keep = d > 0
    return float(np.max(np.abs(u(a[keep]) - u(b[keep])) / d[keep] ** exponent))
