# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar-loop kernels for lgamma, digamma, and trigamma.

Same shift-then-asymptotic-series algorithm and constants as the
numpy fallback in ``_special_py``; a single pass per element avoids
the fallback's masked multi-pass temporaries, which matters for the
small per-batch arrays these see inside training loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport log

cnp.import_array()

cdef double HALF_LOG_2PI = 0.9189385332046727

cdef double[8] DIGAMMA_COEFFS = [
    1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0,
    1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0, -3617.0 / 8160.0,
]
cdef double[8] TRIGAMMA_COEFFS = [
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
    5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0,
]
cdef double[8] LGAMMA_COEFFS = [
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0,
    1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
]


cdef inline double _horner(double z, double* coeffs) nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(7, -1, -1):
        acc = acc * z + coeffs[i]
    return acc


cdef inline double _digamma_scalar(double x) nogil:
    cdef double out = 0.0
    cdef double z
    while x < 6.0:
        out -= 1.0 / x
        x += 1.0
    z = 1.0 / (x * x)
    return out + log(x) - 0.5 / x - z * _horner(z, DIGAMMA_COEFFS)


cdef inline double _trigamma_scalar(double x) nogil:
    cdef double out = 0.0
    cdef double z
    while x < 6.0:
        out += 1.0 / (x * x)
        x += 1.0
    z = 1.0 / (x * x)
    return out + 1.0 / x + 0.5 * z + (z / x) * _horner(z, TRIGAMMA_COEFFS)


cdef inline double _lgamma_scalar(double x) nogil:
    cdef double out = 0.0
    cdef double z
    while x < 10.0:
        out -= log(x)
        x += 1.0
    z = 1.0 / (x * x)
    return out + (x - 0.5) * log(x) - x + HALF_LOG_2PI + _horner(z, LGAMMA_COEFFS) / x


def digamma(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _digamma_scalar(x[i])
    return out_arr


def trigamma(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _trigamma_scalar(x[i])
    return out_arr


def lgamma(double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _lgamma_scalar(x[i])
    return out_arr
