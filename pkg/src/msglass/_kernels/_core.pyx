# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled objective kernels: discrete Crisanti-Sommers value and gradient.

Semantics identical to the pure-numpy fallback in ``pure.py``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log, log1p

cnp.import_array()


cdef double _xi_row(const double* q, const int[::1] ent_off,
                    const int[::1] ent_sp, const double[::1] ent_c) nogil:
    cdef Py_ssize_t e, j
    cdef double total = 0.0, prod
    for e in range(ent_c.shape[0]):
        prod = ent_c[e]
        for j in range(ent_off[e], ent_off[e + 1]):
            prod *= q[ent_sp[j]]
        total += prod
    return total


cdef void _dxi_row(const double* q, const int[::1] ent_off,
                   const int[::1] ent_sp, const double[::1] ent_c,
                   double* out, Py_ssize_t n) nogil:
    cdef Py_ssize_t e, j, j2, s
    cdef double prod
    for s in range(n):
        out[s] = 0.0
    for e in range(ent_c.shape[0]):
        for j in range(ent_off[e], ent_off[e + 1]):
            prod = ent_c[e]
            for j2 in range(ent_off[e], ent_off[e + 1]):
                if j2 != j:
                    prod *= q[ent_sp[j2]]
            out[ent_sp[j]] += prod


def b_value(double[::1] m, double[:, ::1] qe, double[::1] lam, double[::1] h,
            int[::1] ent_off, int[::1] ent_sp, double[::1] ent_c):
    """Discrete Crisanti-Sommers value; +inf when some q_k^s >= 1."""
    cdef Py_ssize_t k = m.shape[0]
    cdef Py_ssize_t n = qe.shape[1]
    cdef Py_ssize_t r, s
    cdef double value = 0.0, bracket, delta, xi_hi, xi_lo, incr

    for s in range(n):
        if qe[k, s] >= 1.0:
            return INFINITY

    for s in range(n):
        # backward accumulation of Delta^s_r with the bracket terms
        delta = 0.0
        bracket = 0.0
        for r in range(k, 0, -1):
            incr = m[r - 1] * (qe[r + 1, s] - qe[r, s])
            if r == k:
                delta = incr
                bracket += log(delta)
            else:
                bracket += log1p(incr / delta) / m[r - 1]
                delta += incr
        bracket += h[s] * h[s] * delta + qe[1, s] / delta
        value += 0.5 * lam[s] * bracket

    xi_lo = _xi_row(&qe[1, 0], ent_off, ent_sp, ent_c)
    for r in range(1, k + 1):
        xi_hi = _xi_row(&qe[r + 1, 0], ent_off, ent_sp, ent_c)
        value += 0.5 * m[r - 1] * (xi_hi - xi_lo)
        xi_lo = xi_hi
    return value


def b_value_grad(double[::1] m, double[:, ::1] qe, double[::1] lam,
                 double[::1] h, int[::1] ent_off, int[::1] ent_sp,
                 double[::1] ent_c):
    """B value plus analytic partials dB/dq_l^s, grad shape (k, n)."""
    cdef Py_ssize_t k = m.shape[0]
    cdef Py_ssize_t n = qe.shape[1]
    cdef Py_ssize_t r, s, l
    cdef double value, m_prev

    value = b_value(m, qe, lam, h, ent_off, ent_sp, ent_c)
    if value == INFINITY:
        raise FloatingPointError("gap condition violated: q_k^s >= 1")

    grad_arr = np.empty((k, n), dtype=np.float64)
    delta_arr = np.empty((k, n), dtype=np.float64)
    dxi_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr
    cdef double[:, ::1] delta = delta_arr
    cdef double[::1] dxi = dxi_arr
    cdef double s_run, base

    with nogil:
        for s in range(n):
            for r in range(k, 0, -1):
                delta[r - 1, s] = m[r - 1] * (qe[r + 1, s] - qe[r, s])
                if r < k:
                    delta[r - 1, s] += delta[r, s]
        for l in range(1, k + 1):
            _dxi_row(&qe[l, 0], ent_off, ent_sp, ent_c, &dxi[0], n)
            m_prev = m[l - 2] if l > 1 else 0.0
            for s in range(n):
                base = h[s] * h[s] - qe[1, s] / (delta[0, s] * delta[0, s])
                s_run = 0.0
                for r in range(1, l):
                    s_run -= (qe[r + 1, s] - qe[r, s]) / (
                        delta[r - 1, s] * delta[r, s])
                grad[l - 1, s] = 0.5 * lam[s] * (m_prev - m[l - 1]) * (
                    base + s_run + dxi[s] / lam[s])
    return value, grad_arr
