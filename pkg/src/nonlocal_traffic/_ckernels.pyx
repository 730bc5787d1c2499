# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the nonlocal solver."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def lookahead_direct(const double[::1] values, const double[::1] weights, double right_state):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = weights.shape[0]
    cdef Py_ssize_t i, k, kmax
    cdef double acc, tail
    out = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] w = out
    for i in range(n + 1):
        acc = 0.0
        kmax = n - i
        if kmax > m:
            kmax = m
        for k in range(kmax):
            acc += weights[k] * values[i + k]
        tail = 0.0
        if right_state != 0.0:
            for k in range(kmax, m):
                tail += weights[k]
        w[i] = acc + tail * right_state
    return out


def upwind_update(const double[::1] values, const double[::1] speeds, double left_state, double lam):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t j
    cdef double f_left, f_right
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] u = out
    f_left = speeds[0] * left_state
    for j in range(n):
        f_right = speeds[j + 1] * values[j]
        u[j] = values[j] - lam * (f_right - f_left)
        f_left = f_right
    return out
