# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot loops.

Signatures and results match :mod:`assortmatch._pykernels` exactly up to
floating-point summation order.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cdef double NEG_BIG = -1.7976931348623157e308

cnp.import_array()


def lse_rows(const double[:, ::1] S, const double[::1] v):
    """out[i] = log sum_j exp(S[i, j] - v[j])."""
    cdef Py_ssize_t n = S.shape[0], m = S.shape[1], i, j
    cdef double mx, t, acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            mx = NEG_BIG
            for j in range(m):
                t = S[i, j] - v[j]
                if t > mx:
                    mx = t
            acc = 0.0
            for j in range(m):
                acc = acc + exp(S[i, j] - v[j] - mx)
            o[i] = mx + log(acc)
    return out


def lse_cols(const double[:, ::1] S, const double[::1] u):
    """out[j] = log sum_i exp(S[i, j] - u[i])."""
    cdef Py_ssize_t n = S.shape[0], m = S.shape[1], i, j
    cdef double t, ui
    mx_arr = np.full(m, NEG_BIG)
    acc_arr = np.zeros(m)
    cdef double[::1] mx = mx_arr
    cdef double[::1] acc = acc_arr
    with nogil:
        for i in range(n):
            ui = u[i]
            for j in range(m):
                t = S[i, j] - ui
                if t > mx[j]:
                    mx[j] = t
        for i in range(n):
            ui = u[i]
            for j in range(m):
                acc[j] = acc[j] + exp(S[i, j] - ui - mx[j])
        for j in range(m):
            acc[j] = mx[j] + log(acc[j])
    return acc_arr


def score_batch(const double[:, ::1] D, const double[::1] offset,
                const double[:, ::1] thetas):
    """counts[k] = #{g : D[g] . thetas[k] + offset[g] >= 0}."""
    cdef Py_ssize_t G = D.shape[0], P = D.shape[1], K = thetas.shape[0]
    cdef Py_ssize_t g, k, c
    cdef double z
    cdef long cnt
    out = np.zeros(K, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for k in range(K):
            cnt = 0
            for g in range(G):
                z = offset[g]
                for c in range(P):
                    z = z + D[g, c] * thetas[k, c]
                if z >= 0.0:
                    cnt = cnt + 1
            o[k] = cnt
    return out
