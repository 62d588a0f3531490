# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled assembly of the 1D collocation matrix; same arithmetic as ``_core_py.assemble``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, log, fabs

cnp.import_array()


cdef inline void _moments(double dlo, double dhi, double s, double *m0, double *m1, double *m2) noexcept nogil:
    m0[0] = (pow(dlo, -2 * s) - pow(dhi, -2 * s)) / (2 * s)
    if fabs(s - 0.5) < 1e-14:
        m1[0] = log(dhi / dlo)
    else:
        m1[0] = (pow(dhi, 1 - 2 * s) - pow(dlo, 1 - 2 * s)) / (1 - 2 * s)
    m2[0] = (pow(dhi, 2 - 2 * s) - pow(dlo, 2 - 2 * s)) / (2 - 2 * s)


cdef inline void _stencil(double[::1] row, Py_ssize_t j, double c, double[::1] lo, double[::1] di,
                          double[::1] up, Py_ssize_t n) noexcept nogil:
    # row -= c * D[j, :]
    cdef Py_ssize_t src = j
    cdef Py_ssize_t col = j
    if j == 0:
        src = 1
        col = 1
    elif j == n - 1:
        src = n - 2
        col = n - 2
    row[col - 1] -= c * lo[src]
    row[col] -= c * di[src]
    row[col + 1] -= c * up[src]


def assemble(double[::1] x, double s, bint correction=True):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t N = n - 2
    cdef Py_ssize_t i, k, src
    cdef double xi, d, a, b, h, dlo, dhi, m0, m1, m2, wk, wk1, A, B, q, near
    lo_a = np.empty(n)
    di_a = np.empty(n)
    up_a = np.empty(n)
    cdef double[::1] lo = lo_a
    cdef double[::1] di = di_a
    cdef double[::1] up = up_a
    cdef double hm, hp
    for i in range(1, n - 1):
        hm = x[i] - x[i - 1]
        hp = x[i + 1] - x[i]
        lo[i] = 2 / (hm * (hm + hp))
        up[i] = 2 / (hp * (hm + hp))
        di[i] = -2 / (hm * hp)
    lo[0] = lo[1]; di[0] = di[1]; up[0] = up[1]
    lo[n - 1] = lo[n - 2]; di[n - 1] = di[n - 2]; up[n - 1] = up[n - 2]

    M_a = np.zeros((N, n))
    cdef double[:, ::1] M = M_a
    cdef double[::1] row
    for i in range(1, N + 1):
        row = M[i - 1]
        xi = x[i]
        d = xi - x[i - 1]
        if x[i + 1] - xi < d:
            d = x[i + 1] - xi
        row[i] += 2 * pow(d, -2 * s) / (2 * s)
        near = -pow(d, 2 - 2 * s) / (2 - 2 * s)
        row[i - 1] += near * lo[i]
        row[i] += near * di[i]
        row[i + 1] += near * up[i]
        for k in range(N + 1):
            a = x[k]
            b = x[k + 1]
            h = b - a
            if k < i:
                dlo = xi - b
                dhi = xi - a
            else:
                dlo = a - xi
                dhi = b - xi
            if (k == i - 1 or k == i) and dlo < d:
                dlo = d
            if dhi <= dlo:
                continue
            _moments(dlo, dhi, s, &m0, &m1, &m2)
            if k < i:
                wk = ((b - xi) * m0 + m1) / h
                wk1 = m0 - wk
                A = xi - a
                B = xi - b
            else:
                wk1 = ((xi - a) * m0 + m1) / h
                wk = m0 - wk1
                A = a - xi
                B = b - xi
            row[k] -= wk
            row[k + 1] -= wk1
            if correction:
                q = 0.25 * (m2 - (A + B) * m1 + A * B * m0)
                _stencil(row, k, q, lo, di, up, n)
                _stencil(row, k + 1, q, lo, di, up, n)
    return M_a
