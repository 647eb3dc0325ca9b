# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled flow right-hand-side kernels.

Mirrors consflow._kernels._pure function for function; see that module for
the array layout contract.
"""

from libc.math cimport exp

import numpy as np

NAME = "compiled"

DEF ZERO = 0
DEF SSN = 1
DEF EXPSUM = 2
DEF QUARTIC = 3
DEF LINEAR = 4


cdef void _grad_agent(int code, double s, const double[::1] vec,
                      const double[::1] xi, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = xi.shape[0]
    cdef Py_ssize_t k
    cdef double r, acc
    if code == ZERO:
        for k in range(n):
            out[k] = 0.0
    elif code == SSN:
        for k in range(n):
            out[k] = 2.0 * s * (xi[k] - vec[k])
    elif code == EXPSUM:
        for k in range(n):
            out[k] = s * exp(s * xi[k])
    elif code == QUARTIC:
        acc = 0.0
        for k in range(n):
            r = xi[k] - vec[k]
            acc += r * r
        for k in range(n):
            out[k] = 4.0 * acc * (xi[k] - vec[k])
    elif code == LINEAR:
        for k in range(n):
            out[k] = vec[k]


def gradient_stack(const double[::1] x, const int[::1] codes,
                   const double[::1] scal, const double[:, ::1] vecs):
    cdef Py_ssize_t m = vecs.shape[0]
    cdef Py_ssize_t n = vecs.shape[1]
    out_arr = np.empty(m * n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(m):
        _grad_agent(codes[i], scal[i], vecs[i], x[i * n:(i + 1) * n],
                    out[i * n:(i + 1) * n])
    return out_arr


def consensus_rhs(const double[::1] x, const double[:, ::1] L, Py_ssize_t n):
    cdef Py_ssize_t m = L.shape[0]
    out_arr = np.empty(m * n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, d
    cdef double acc
    for i in range(m):
        for d in range(n):
            acc = 0.0
            for j in range(m):
                acc += L[i, j] * x[j * n + d]
            out[i * n + d] = -acc
    return out_arr


def integral_rhs(const double[::1] x, const double[::1] y,
                 const double[:, ::1] L, const double[:, :, ::1] P,
                 const int[::1] codes, const double[::1] scal,
                 const double[:, ::1] vecs):
    cdef Py_ssize_t m = vecs.shape[0]
    cdef Py_ssize_t n = vecs.shape[1]
    dx_arr = np.empty(m * n)
    dy_arr = np.empty(m * n)
    work_arr = np.empty(n)
    grad_arr = np.empty(n)
    cdef double[::1] dx = dx_arr
    cdef double[::1] dy = dy_arr
    cdef double[::1] work = work_arr
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t i, j, d, e
    cdef double acc
    for i in range(m):
        _grad_agent(codes[i], scal[i], vecs[i], x[i * n:(i + 1) * n], grad)
        # work = grad_i + (Lbar x)_i + y_i; dy_i = (Lbar x)_i
        for d in range(n):
            acc = 0.0
            for j in range(m):
                acc += L[i, j] * x[j * n + d]
            dy[i * n + d] = acc
            work[d] = grad[d] + acc + y[i * n + d]
        for d in range(n):
            acc = 0.0
            for e in range(n):
                acc += P[i, d, e] * work[e]
            dx[i * n + d] = -acc
    return dx_arr, dy_arr


def diminishing_rhs(const double[::1] x, double alpha,
                    const double[:, ::1] L, const double[:, :, ::1] P,
                    const int[::1] codes, const double[::1] scal,
                    const double[:, ::1] vecs):
    cdef Py_ssize_t m = vecs.shape[0]
    cdef Py_ssize_t n = vecs.shape[1]
    dx_arr = np.empty(m * n)
    work_arr = np.empty(n)
    grad_arr = np.empty(n)
    cdef double[::1] dx = dx_arr
    cdef double[::1] work = work_arr
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t i, j, d, e
    cdef double acc
    for i in range(m):
        _grad_agent(codes[i], scal[i], vecs[i], x[i * n:(i + 1) * n], grad)
        for d in range(n):
            acc = 0.0
            for j in range(m):
                acc += L[i, j] * x[j * n + d]
            work[d] = alpha * grad[d] + acc
        for d in range(n):
            acc = 0.0
            for e in range(n):
                acc += P[i, d, e] * work[e]
            dx[i * n + d] = -acc
    return dx_arr
