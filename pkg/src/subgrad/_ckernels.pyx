# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p

cnp.import_array()

DEF HARD = 0
DEF RATIO = 1
DEF SIGMOID = 2
DEF SOFTPLUS_RATIO = 3


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _log_softplus(double z) nogil:
    # log(log1p(e^z)); the series keeps it finite when the softplus underflows
    if z < -30.0:
        return z - 0.5 * exp(z)
    if z > 0:
        return log(z + log1p(exp(-z)))
    return log(log1p(exp(z)))


cdef inline double _link(int code, double a, double b, double t) nogil:
    cdef double ap, bp
    if code == HARD:
        return 1.0 if a >= b else 0.0
    if code == RATIO:
        ap = a if a > 0 else 0.0
        bp = b if b > 0 else 0.0
        if ap + bp > 0:
            return ap / (ap + bp)
        return 0.5
    if code == SIGMOID:
        return _sigmoid((a - b) / t)
    return _sigmoid(_log_softplus(a / t) - _log_softplus(b / t))


def cut_values_all(W_in, nbits=None):
    """Cut value of every subset by bitmask, walking a Gray code with O(n) updates."""
    cdef double[:, ::1] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef Py_ssize_t n = W.shape[0]
    cdef Py_ssize_t total = (<Py_ssize_t>1) << (n if nbits is None else nbits)
    out_arr = np.empty(total, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] deg = np.ascontiguousarray(np.asarray(W).sum(axis=1))
    cdef double[::1] s = np.zeros(n)
    cdef Py_ssize_t k, j, l, g, prev = 0
    cdef double cut = 0.0
    cdef double sign
    with nogil:
        out[0] = 0.0
        for k in range(1, total):
            g = k ^ (k >> 1)
            j = 0
            while not ((g ^ prev) >> j) & 1:
                j += 1
            if (g >> j) & 1:
                cut += deg[j] - 2.0 * s[j]
                sign = 1.0
            else:
                cut -= deg[j] - 2.0 * s[j]
                sign = -1.0
            for l in range(n):
                s[l] += sign * W[l, j]
            out[g] = cut
            prev = g
    return out_arr


def dgreedy_sample_cut(W_in, order_in, int code, double t, U_in):
    cdef double[:, ::1] W = np.ascontiguousarray(W_in, dtype=np.float64)
    cdef double[:, ::1] U = np.ascontiguousarray(U_in, dtype=np.float64)
    cdef Py_ssize_t[::1] order = np.ascontiguousarray(order_in, dtype=np.intp)
    cdef Py_ssize_t runs = U.shape[0], n = U.shape[1]
    x_arr = np.zeros((runs, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] x = x_arr
    cdef double[::1] deg = np.ascontiguousarray(np.asarray(W).sum(axis=1))
    cdef double[::1] dX = np.empty(n)
    cdef double[::1] dY = np.empty(n)
    cdef Py_ssize_t r, i, e, l
    cdef double a, b
    with nogil:
        for r in range(runs):
            for l in range(n):
                dX[l] = 0.0
                dY[l] = deg[l]
            for i in range(n):
                e = order[i]
                a = deg[e] - 2.0 * dX[e]
                b = 2.0 * dY[e] - deg[e]
                if U[r, i] < _link(code, a, b, t):
                    x[r, e] = 1
                    for l in range(n):
                        dX[l] += W[e, l]
                else:
                    for l in range(n):
                        dY[l] -= W[e, l]
    return x_arr
