# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the single-hidden-layer network.

Same signatures and parameter layout as :mod:`evonet._kernels_py`; results
agree with it to rounding. Pre-activations are accumulated in C, pushed
through one vectorised ``np.tanh`` call and then reduced in C again.
"""
import numpy as np
cimport numpy as cnp

from .activations import TANH_DGAIN, TANH_GAIN, TANH_OFFSET, TANH_SLOPE

cnp.import_array()

cdef double[::1] SLOPE = TANH_SLOPE
cdef double[::1] OFFSET = TANH_OFFSET
cdef double[::1] GAIN = TANH_GAIN
cdef double[::1] DGAIN = TANH_DGAIN


cdef object _tanh_table(const double[::1] w, const cnp.intp_t[::1] codes, const double[:, ::1] X):
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t h = codes.shape[0]
    cdef Py_ssize_t p, j, k, base
    cdef double z
    table = np.empty((P, h))
    cdef double[:, ::1] S = table
    with nogil:
        for p in range(P):
            for j in range(h):
                base = j * (d + 1)
                z = w[base + d]
                for k in range(d):
                    z = z + w[base + k] * X[p, k]
                S[p, j] = z * SLOPE[codes[j]]
    np.tanh(table, out=table)
    return table


def predict(const double[::1] params, const cnp.intp_t[::1] codes, const double[:, ::1] X):
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t h = codes.shape[0]
    cdef Py_ssize_t vbase = h * (d + 1)
    cdef Py_ssize_t p, j
    cdef double y
    cdef double[:, ::1] T = _tanh_table(params, codes, X)
    out = np.empty(P)
    cdef double[::1] o = out
    with nogil:
        for p in range(P):
            y = params[vbase + h]
            for j in range(h):
                y = y + params[vbase + j] * (OFFSET[codes[j]] + GAIN[codes[j]] * T[p, j])
            o[p] = y
    return out


def sse(const double[::1] params, const cnp.intp_t[::1] codes,
        const double[:, ::1] X, const double[::1] t):
    cdef double[::1] y = predict(params, codes, X)
    cdef Py_ssize_t p
    cdef double e
    cdef double total = 0.0
    with nogil:
        for p in range(y.shape[0]):
            e = y[p] - t[p]
            total = total + e * e
    return total


def sse_grad(const double[::1] params, const cnp.intp_t[::1] codes,
             const double[:, ::1] X, const double[::1] t):
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t h = codes.shape[0]
    cdef Py_ssize_t vbase = h * (d + 1)
    cdef Py_ssize_t p, j, k, base
    cdef double e, delta, a, tt
    cdef double total = 0.0
    cdef double[:, ::1] T = _tanh_table(params, codes, X)
    grad_arr = np.zeros(params.shape[0])
    cdef double[::1] g = grad_arr
    with nogil:
        for p in range(P):
            # same summation order as predict, so a perfect fit gives e == 0 exactly
            e = params[vbase + h]
            for j in range(h):
                e = e + params[vbase + j] * (OFFSET[codes[j]] + GAIN[codes[j]] * T[p, j])
            e = e - t[p]
            total = total + e * e
            g[vbase + h] += e
            for j in range(h):
                tt = T[p, j]
                a = OFFSET[codes[j]] + GAIN[codes[j]] * tt
                g[vbase + j] += e * a
                delta = e * params[vbase + j] * (DGAIN[codes[j]] * (1.0 - tt * tt))
                base = j * (d + 1)
                for k in range(d):
                    g[base + k] += delta * X[p, k]
                g[base + d] += delta
    return total, grad_arr


def residuals_jacobian(const double[::1] params, const cnp.intp_t[::1] codes,
                       const double[:, ::1] X, const double[::1] t):
    cdef Py_ssize_t P = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t h = codes.shape[0]
    cdef Py_ssize_t vbase = h * (d + 1)
    cdef Py_ssize_t p, j, k, base
    cdef double dz, a, tt, y
    cdef double[:, ::1] T = _tanh_table(params, codes, X)
    e_arr = np.empty(P)
    J_arr = np.empty((P, params.shape[0]))
    cdef double[::1] e = e_arr
    cdef double[:, ::1] J = J_arr
    with nogil:
        for p in range(P):
            y = params[vbase + h]
            for j in range(h):
                tt = T[p, j]
                a = OFFSET[codes[j]] + GAIN[codes[j]] * tt
                y = y + params[vbase + j] * a
                dz = params[vbase + j] * (DGAIN[codes[j]] * (1.0 - tt * tt))
                base = j * (d + 1)
                for k in range(d):
                    J[p, base + k] = dz * X[p, k]
                J[p, base + d] = dz
                J[p, vbase + j] = a
            J[p, vbase + h] = 1.0
            e[p] = y - t[p]
    return e_arr, J_arr
