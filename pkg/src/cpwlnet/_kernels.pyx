# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled breakpoint-propagation kernels (same contract as _kernels_py)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef void _sort_pairs(double* key, Py_ssize_t* col, double* tt, Py_ssize_t m) noexcept nogil:
    # insertion sort; m is the crossing count of one segment (small)
    cdef Py_ssize_t i, j
    cdef double k, tv
    cdef Py_ssize_t c
    for i in range(1, m):
        k = key[i]
        c = col[i]
        tv = tt[i]
        j = i - 1
        while j >= 0 and key[j] > k:
            key[j + 1] = key[j]
            col[j + 1] = col[j]
            tt[j + 1] = tt[j]
            j -= 1
        key[j + 1] = k
        col[j + 1] = c
        tt[j + 1] = tv


def refine_crossings(xs_in, P_in, double tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], w = P.shape[1]
    cdef Py_ssize_t i, j, m, q, total = 0, kept = 0, row
    cdef double a, b, xl, xr, xc, last
    if n < 2:
        return xs.copy(), P.copy()
    for i in range(n - 1):
        for j in range(w):
            if P[i, j] * P[i + 1, j] < 0.0:
                total += 1
    if total == 0:
        return xs.copy(), P.copy()

    cdef double* key = <double*> malloc(w * sizeof(double))
    cdef double* tt = <double*> malloc(w * sizeof(double))
    cdef Py_ssize_t* col = <Py_ssize_t*> malloc(w * sizeof(Py_ssize_t))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_x = np.empty(n + total)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_p = np.empty((n + total, w))
    row = 0
    try:
        for i in range(n - 1):
            xl = xs[i]
            xr = xs[i + 1]
            out_x[row] = xl
            for j in range(w):
                out_p[row, j] = P[i, j]
            row += 1
            m = 0
            for j in range(w):
                a = P[i, j]
                b = P[i + 1, j]
                if a * b < 0.0:
                    tt[m] = a / (a - b)
                    key[m] = xl + tt[m] * (xr - xl)
                    col[m] = j
                    m += 1
            if m == 0:
                continue
            _sort_pairs(key, col, tt, m)
            for q in range(m):
                xc = key[q]
                if xc - xl <= tol or xr - xc <= tol:
                    continue
                if q > 0 and xc - key[q - 1] <= tol:
                    continue
                out_x[row] = xc
                for j in range(w):
                    out_p[row, j] = P[i, j] + tt[q] * (P[i + 1, j] - P[i, j])
                out_p[row, col[q]] = 0.0
                row += 1
        out_x[row] = xs[n - 1]
        for j in range(w):
            out_p[row, j] = P[n - 1, j]
        row += 1
    finally:
        free(key)
        free(tt)
        free(col)
    return out_x[:row].copy(), out_p[:row].copy()


def prune_collinear(xs_in, V_in, double rtol):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(xs_in, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.ascontiguousarray(V_in, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0], w = V.shape[1]
    cdef Py_ssize_t i, j
    cdef double span, vmax = 0.0, atol, sl, sr
    cdef bint flat
    if n <= 2:
        return xs.copy(), V.copy()
    for i in range(n):
        for j in range(w):
            if fabs(V[i, j]) > vmax:
                vmax = fabs(V[i, j])
    span = xs[n - 1] - xs[0]
    atol = rtol * (vmax / span) if span > 0 else 0.0
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] keep = np.ones(n, dtype=np.uint8)
    for i in range(1, n - 1):
        flat = True
        for j in range(w):
            sl = (V[i, j] - V[i - 1, j]) / (xs[i] - xs[i - 1])
            sr = (V[i + 1, j] - V[i, j]) / (xs[i + 1] - xs[i])
            if fabs(sl - sr) > rtol * (fabs(sl) + fabs(sr)) + atol:
                flat = False
                break
        if flat:
            keep[i] = 0
    mask = keep.view(np.bool_)
    return xs[mask], V[mask]
