# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror ``_fallback`` exactly."""
from libc.math cimport sqrt, fabs

import numpy as np


def capped_penalty_sum(double[::1] x, double mu):
    cdef double root = sqrt(mu)
    cdef double total = 0.0
    cdef double gap
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        gap = root - fabs(x[i])
        if gap > 0.0:
            total += mu - gap * gap
        else:
            total += mu
    return total


cdef inline double _prox_scalar(double m, double tau, double mu, double root) noexcept nogil:
    cdef double a = fabs(m)
    cdef double best_x, best_h, c, gap, h
    if tau == 1.0:
        return m if a > root else 0.0
    best_x = 0.0
    best_h = tau * a * a - mu
    c = (tau * a - root) / (tau - 1.0)
    if 0.0 <= c <= root:
        gap = root - c
        h = -gap * gap + tau * (c - a) * (c - a)
        if h < best_h:
            best_h = h
            best_x = c
    if a >= root and best_h > 0.0:
        best_x = a
    if m < 0.0:
        return -best_x
    return best_x


def prox_capped_elementwise(double[::1] m, double tau, double mu):
    cdef double root = sqrt(mu)
    cdef Py_ssize_t i, n = m.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _prox_scalar(m[i], tau, mu, root)
    return out_arr
