"""Reference (numpy) assembly of the 1D collocation matrix for the kernel |z|^(-1-2s).

Row i approximates, at node x_i, PV int (u(x_i) - u(y)) |x_i - y|^(-1-2s) dy
for u piecewise linear on the nodes plus a quadratic correction, with u
taking its nodal boundary values at x_0 = -1 and x_{N+1} = 1. The
exterior |y| > 1 contributes u_i times the kernel mass only; the part
carrying the exterior data is added by the caller.

Inside |y - x_i| < d (d the smaller adjacent gap) u is replaced by its
second-order Taylor expansion, using a three-point second difference.
On every other element the linear interpolant is integrated exactly and
the quadratic interpolation error (y-a)(y-b) u''/2 is added with u''
averaged from the element's end nodes.
"""

from __future__ import annotations

import numpy as np


def second_difference_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three-point second-derivative stencils (lower, diag, upper) for rows 1..N; rows 0, N+1 copy neighbours."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    lo = np.empty(x.size)
    di = np.empty(x.size)
    up = np.empty(x.size)
    lo[1:-1] = 2 / (hm * (hm + hp))
    up[1:-1] = 2 / (hp * (hm + hp))
    di[1:-1] = -2 / (hm * hp)
    for dst, src in ((0, 1), (x.size - 1, x.size - 2)):
        lo[dst], di[dst], up[dst] = lo[src], di[src], up[src]
    return lo, di, up


def _moments(dlo, dhi, s):
    m0 = (dlo ** (-2 * s) - dhi ** (-2 * s)) / (2 * s)
    if abs(s - 0.5) < 1e-14:
        m1 = np.log(dhi / dlo)
    else:
        m1 = (dhi ** (1 - 2 * s) - dlo ** (1 - 2 * s)) / (1 - 2 * s)
    m2 = (dhi ** (2 - 2 * s) - dlo ** (2 - 2 * s)) / (2 - 2 * s)
    return m0, m1, m2


def _apply_stencil(row: np.ndarray, w: np.ndarray, lo, di, up, scale: float = 1.0):
    """row -= scale * sum_j w_j D[j, :] for the tridiagonal-with-copied-ends D."""
    n = w.size
    # interior rows j = 1..n-2 touch columns j-1, j, j+1
    row[0:n - 2] -= scale * w[1:-1] * lo[1:-1]
    row[1:n - 1] -= scale * w[1:-1] * di[1:-1]
    row[2:n] -= scale * w[1:-1] * up[1:-1]
    # row 0 is row 1's stencil, row n-1 is row n-2's stencil
    row[0:3] -= scale * w[0] * np.array([lo[1], di[1], up[1]])
    row[n - 3:n] -= scale * w[-1] * np.array([lo[-2], di[-2], up[-2]])


def assemble(x: np.ndarray, s: float, correction: bool = True) -> np.ndarray:
    """Matrix of shape (N, N+2) acting on all nodal values, kernel constant 1."""
    x = np.ascontiguousarray(x, dtype=float)
    N = x.size - 2
    lo, di, up = second_difference_rows(x)
    a, b = x[:-1], x[1:]
    h = b - a
    M = np.zeros((N, N + 2))
    ks = np.arange(N + 1)
    for i in range(1, N + 1):
        xi = x[i]
        d = min(xi - x[i - 1], x[i + 1] - xi)
        row = M[i - 1]
        row[i] += 2 * d ** (-2 * s) / (2 * s)
        near = -d ** (2 - 2 * s) / (2 - 2 * s)
        row[i - 1] += near * lo[i]
        row[i] += near * di[i]
        row[i + 1] += near * up[i]

        left = ks < i
        dlo = np.where(left, xi - b, a - xi)
        dhi = np.where(left, xi - a, b - xi)
        dlo[i - 1] = max(dlo[i - 1], d)
        dlo[i] = max(dlo[i], d)
        ok = dhi > dlo
        dlo_ok = np.where(ok, dlo, 1.0)
        dhi_ok = np.where(ok, dhi, 2.0)
        m0, m1, m2 = _moments(dlo_ok, dhi_ok, s)
        m0, m1, m2 = m0 * ok, m1 * ok, m2 * ok
        # weights of the two hat functions on each element
        wk_left = ((b - xi) * m0 + m1) / h
        wk1_right = ((xi - a) * m0 + m1) / h
        wk = np.where(left, wk_left, m0 - wk1_right)
        wk1 = np.where(left, m0 - wk_left, wk1_right)
        np.subtract.at(row, ks, wk)
        np.subtract.at(row, ks + 1, wk1)
        if correction:
            A = np.where(left, xi - a, a - xi)
            B = np.where(left, xi - b, b - xi)
            q = m2 - (A + B) * m1 + A * B * m0
            w = np.zeros(N + 2)
            np.add.at(w, ks, 0.25 * q)
            np.add.at(w, ks + 1, 0.25 * q)
            _apply_stencil(row, w, lo, di, up)
    return M
