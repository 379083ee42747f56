# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: stable sigmoid, fused logistic objective/gradient/Hessian,
weighted gram matrix.  Contracts match ``_kernels_py``."""

from libc.math cimport exp, log1p

import numpy as np

NAME = "c"


cdef inline double _sig(double g) noexcept nogil:
    cdef double e
    if g >= 0.0:
        e = exp(-g)
        return 1.0 / (1.0 + e)
    e = exp(g)
    return e / (1.0 + e)


cdef inline double _l1pe(double g) noexcept nogil:
    if g > 33.0:
        return g
    if g >= 0.0:
        return g + log1p(exp(-g))
    return log1p(exp(g))


def sigmoid(g):
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t i, n = gv.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _sig(gv[i])
    return out_arr


def log1pexp(g):
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t i, n = gv.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _l1pe(gv[i])
    return out_arr


def logistic_obj_grad_hess(x, y, double alpha, beta, weights, offsets):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t i, j, k, n = xv.shape[0], d = xv.shape[1]
    grad_arr = np.zeros(d + 1)
    hess_arr = np.zeros((d + 1, d + 1))
    cdef double[::1] grad = grad_arr
    cdef double[:, ::1] hess = hess_arr
    cdef double obj = 0.0, eta, p, r, q, xj
    with nogil:
        for i in range(n):
            eta = alpha + lv[i]
            for j in range(d):
                eta += xv[i, j] * bv[j]
            p = _sig(eta)
            obj += wv[i] * (yv[i] * eta - _l1pe(eta))
            r = wv[i] * (yv[i] - p)
            q = wv[i] * p * (1.0 - p)
            grad[0] += r
            hess[0, 0] += q
            for j in range(d):
                xj = xv[i, j]
                grad[j + 1] += r * xj
                hess[0, j + 1] += q * xj
                for k in range(j, d):
                    hess[j + 1, k + 1] += q * xj * xv[i, k]
        for j in range(d):
            hess[j + 1, 0] = hess[0, j + 1]
            for k in range(j + 1, d):
                hess[k + 1, j + 1] = hess[j + 1, k + 1]
    return obj, grad_arr, hess_arr


def weighted_gram(x, w):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t i, j, k, n = xv.shape[0], d = xv.shape[1]
    out_arr = np.zeros((d + 1, d + 1))
    cdef double[:, ::1] out = out_arr
    cdef double q, xj
    with nogil:
        for i in range(n):
            q = wv[i]
            out[0, 0] += q
            for j in range(d):
                xj = xv[i, j]
                out[0, j + 1] += q * xj
                for k in range(j, d):
                    out[j + 1, k + 1] += q * xj * xv[i, k]
        for j in range(d):
            out[j + 1, 0] = out[0, j + 1]
            for k in range(j + 1, d):
                out[k + 1, j + 1] = out[j + 1, k + 1]
    return out_arr
