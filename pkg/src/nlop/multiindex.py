"""Multi-indices, monomials and polynomials of bounded total degree."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DegenerateSampleError",
    "MultiIndex",
    "Polynomial",
    "best_poly_fit",
    "binom_multi",
    "enumerate_multi_indices",
    "factorial",
    "monomial",
    "solution_space_dim",
]


class DegenerateSampleError(ValueError):
    """Sample points do not determine a unique polynomial of the requested degree."""


@dataclass(frozen=True, order=True)
class MultiIndex:
    entries: tuple[int, ...]
    order: int = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        entries = tuple(int(a) for a in self.entries)
        if not entries:
            raise ValueError("a multi-index needs at least one entry")
        if any(a < 0 for a in entries):
            raise ValueError(f"negative entry in multi-index {entries}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "order", sum(entries))

    @classmethod
    def of(cls, *entries: int) -> "MultiIndex":
        return cls(tuple(entries))

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> int:
        return self.entries[i]

    def plus(self, other: "MultiIndex") -> "MultiIndex":
        _check_same_dim(self, other)
        return MultiIndex(tuple(a + b for a, b in zip(self, other)))

    def minus(self, other: "MultiIndex") -> "MultiIndex":
        _check_same_dim(self, other)
        return MultiIndex(tuple(a - b for a, b in zip(self, other)))

    def leq(self, other: "MultiIndex") -> bool:
        """Componentwise comparison ``self <= other``."""
        _check_same_dim(self, other)
        return all(a <= b for a, b in zip(self, other))

    def __str__(self) -> str:
        return "(" + ",".join(str(a) for a in self.entries) + ")"


def _check_same_dim(a: MultiIndex, b: MultiIndex) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def _as_index(alpha) -> MultiIndex:
    if isinstance(alpha, MultiIndex):
        return alpha
    if isinstance(alpha, (int, np.integer)):
        return MultiIndex((int(alpha),))
    return MultiIndex(tuple(alpha))


def enumerate_multi_indices(n: int, max_degree: int) -> list[MultiIndex]:
    """All multi-indices of length ``n`` with ``|alpha| <= max_degree``.

    Ordered by total degree, then lexicographically with the first
    coordinate largest (``x1 > x2 > ...``). ``max_degree = -1`` yields the
    empty list.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if max_degree < -1:
        raise ValueError("max_degree must be >= -1")
    out: list[MultiIndex] = []
    for d in range(max_degree + 1):
        out.extend(MultiIndex(e) for e in _compositions(d, n))
    return out


def _compositions(d: int, n: int):
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _compositions(d - first, n - 1):
            yield (first,) + rest


def solution_space_dim(n: int, m: int) -> int:
    """Dimension of the polynomials of degree <= m-1 in n variables."""
    if n < 1 or m < 0:
        raise ValueError("need n >= 1 and m >= 0")
    # exact integers; python ints cannot overflow
    return sum(math.comb(j + n - 1, n - 1) for j in range(m))


def factorial(alpha) -> int:
    alpha = _as_index(alpha)
    return math.prod(math.factorial(a) for a in alpha)


def monomial(alpha, x):
    """Evaluate ``x**alpha``; ``x`` has trailing axis of length ``n``."""
    alpha = _as_index(alpha)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != alpha.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match {alpha}")
    out = np.ones(x.shape[:-1])
    for i, a in enumerate(alpha):
        if a:
            out = out * x[..., i] ** a
    return out if out.ndim else float(out)


def binom_multi(gamma, beta) -> int:
    gamma, beta = _as_index(gamma), _as_index(beta)
    if not beta.leq(gamma):
        raise ValueError(f"binom_multi needs beta <= gamma componentwise, got {beta}, {gamma}")
    return math.prod(math.comb(g, b) for g, b in zip(gamma, beta))


@dataclass(frozen=True)
class Polynomial:
    """A polynomial of total degree at most ``max_degree`` in ``dim`` variables.

    ``max_degree = -1`` is the zero space; ``coeffs`` must then be empty.
    """

    dim: int
    max_degree: int
    coeffs: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[MultiIndex, float] = {}
        for alpha, c in dict(self.coeffs).items():
            alpha = _as_index(alpha)
            if alpha.dim != self.dim:
                raise ValueError(f"{alpha} has wrong dimension for dim={self.dim}")
            if alpha.order > self.max_degree:
                raise ValueError(f"{alpha} exceeds max_degree={self.max_degree}")
            clean[alpha] = float(c)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def zero(cls, dim: int, max_degree: int = -1) -> "Polynomial":
        return cls(dim, max_degree, {})

    @classmethod
    def from_vector(cls, dim: int, max_degree: int, vec: Sequence[float]) -> "Polynomial":
        basis = enumerate_multi_indices(dim, max_degree)
        if len(vec) != len(basis):
            raise ValueError(f"expected {len(basis)} coefficients, got {len(vec)}")
        return cls(dim, max_degree, dict(zip(basis, vec)))

    def coefficient_vector(self) -> np.ndarray:
        """Coefficients in graded-lex order of :func:`enumerate_multi_indices`."""
        basis = enumerate_multi_indices(self.dim, self.max_degree)
        return np.array([self.coeffs.get(a, 0.0) for a in basis])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        out = np.zeros(x.shape[:-1])
        # sorted keys make the summation order independent of dict history
        for alpha in sorted(self.coeffs):
            out = out + self.coeffs[alpha] * monomial(alpha, x)
        return out if out.ndim else float(out)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        deg = max(self.max_degree, other.max_degree)
        keys = set(self.coeffs) | set(other.coeffs)
        return Polynomial(self.dim, deg, {a: self.coeffs.get(a, 0.0) + other.coeffs.get(a, 0.0) for a in keys})

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.dim, self.max_degree, {a: -c for a, c in self.coeffs.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def scaled(self, factor: float) -> "Polynomial":
        return Polynomial(self.dim, self.max_degree, {a: factor * c for a, c in self.coeffs.items()})

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "max_degree": self.max_degree,
            "coefficients": [float(c) for c in self.coefficient_vector()],
        }


def vandermonde(points: np.ndarray, basis: Iterable[MultiIndex]) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    cols = [np.atleast_1d(monomial(a, points)) for a in basis]
    if not cols:
        return np.zeros((points.shape[0], 0))
    return np.stack(cols, axis=-1)


def best_poly_fit(samples, n: int, max_degree: int, *, rcond: float = 1e-12) -> tuple[Polynomial, float]:
    """Least-squares polynomial fit of degree <= ``max_degree`` to samples.

    ``samples`` is either a sequence of ``(point, value)`` pairs or a tuple
    ``(points, values)`` of arrays. Returns the polynomial and the sup-norm
    residual over the samples, an upper bound for the best uniform
    approximation error restricted to the sample set.
    """
    points, values = _split_samples(samples, n)
    if max_degree < 0:
        return Polynomial.zero(n, -1), float(np.max(np.abs(values))) if values.size else 0.0
    basis = enumerate_multi_indices(n, max_degree)
    if points.shape[0] < len(basis):
        raise DegenerateSampleError(f"{points.shape[0]} samples cannot determine {len(basis)} coefficients")
    if np.any(np.linalg.norm(points, axis=-1) > 1.0 + 1e-12):
        raise ValueError("sample points must lie in the closed unit ball")
    V = vandermonde(points, basis)
    coef, _, rank, sv = np.linalg.lstsq(V, values, rcond=None)
    if rank < len(basis) or sv[-1] <= rcond * sv[0]:
        raise DegenerateSampleError(f"rank {rank} < {len(basis)}: degenerate sample geometry")
    resid = values - V @ coef
    return Polynomial(n, max_degree, dict(zip(basis, coef))), float(np.max(np.abs(resid)))


def _split_samples(samples, n: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2 and all(isinstance(s, np.ndarray) for s in samples):
        points, values = samples
    else:
        points = [p for p, _ in samples]
        values = [v for _, v in samples]
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, n)
    if points.shape[-1] != n:
        raise ValueError(f"points have dimension {points.shape[-1]}, expected {n}")
    return points, values
