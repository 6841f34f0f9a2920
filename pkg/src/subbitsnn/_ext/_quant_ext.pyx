# cython: language_level=3
"""Compiled quantizer kernels; see _quant_py.py for the reference semantics."""

import math

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, floor

cnp.import_array()

cdef enum:
    MAXD = 64

cdef int _threads = 1


def set_num_threads(int n):
    global _threads
    _threads = max(1, n)


cdef inline void _sort(double* v, int n) noexcept nogil:
    cdef int i, j
    cdef double x
    for i in range(1, n):
        x = v[i]
        j = i - 1
        while j >= 0 and v[j] > x:
            v[j + 1] = v[j]
            j -= 1
        v[j + 1] = x


cdef inline double _quantile(double* s, int n, double q) noexcept nogil:
    cdef double pos = q * (n - 1)
    cdef int lo = <int>floor(pos)
    cdef double frac = pos - lo
    cdef double v = s[lo]
    if frac > 0.0:
        v = v + frac * (s[lo + 1] - v)
    return v


cdef void _scale_one(const double* w, int kh, int kw, double gamma, bint no_fence,
                     double* out, cnp.uint8_t* mask, double* omega) noexcept nogil:
    cdef double buf[MAXD]
    cdef int d = kh * kw
    cdef int e, i, j, cnt
    cdef double q1, q3, iqr, lo, hi, acc, om
    for e in range(d):
        buf[e] = w[e]
    _sort(buf, d)
    q1 = _quantile(buf, d, 0.25)
    q3 = _quantile(buf, d, 0.75)
    iqr = q3 - q1
    lo = q1 - gamma * iqr
    hi = q3 + gamma * iqr
    for i in range(kh):
        for j in range(kw):
            e = i * kw + j
            out[e] = w[e]
            omega[e] = 1.0
            mask[e] = 0
            if no_fence or not (w[e] < lo or w[e] > hi):
                continue
            mask[e] = 1
            acc = 0.0
            cnt = 0
            if i > 0:
                acc = acc + fabs(w[e] - w[e - kw])
                cnt += 1
            if i < kh - 1:
                acc = acc + fabs(w[e] - w[e + kw])
                cnt += 1
            if j > 0:
                acc = acc + fabs(w[e] - w[e - 1])
                cnt += 1
            if j < kw - 1:
                acc = acc + fabs(w[e] - w[e + 1])
                cnt += 1
            om = acc / cnt
            omega[e] = om
            if om > 0.0:
                out[e] = w[e] / om


def osquant_scale(kernels, double gamma):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] k = np.ascontiguousarray(kernels, dtype=np.float64)
    cdef Py_ssize_t n = k.shape[0]
    cdef int kh = k.shape[1]
    cdef int kw = k.shape[2]
    if kh * kw > MAXD:
        raise ValueError("kernel too large for compiled path")
    cdef bint no_fence = math.isinf(gamma)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] scaled = np.empty_like(k)
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] mask = np.empty((n, kh, kw), dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] omega = np.empty_like(k)
    cdef double* kp = &k[0, 0, 0] if n else NULL
    cdef double* sp = &scaled[0, 0, 0] if n else NULL
    cdef cnp.uint8_t* mp = &mask[0, 0, 0] if n else NULL
    cdef double* op = &omega[0, 0, 0] if n else NULL
    cdef int d = kh * kw
    cdef Py_ssize_t i
    for i in prange(n, nogil=True, num_threads=_threads, schedule="static"):
        _scale_one(kp + i * d, kh, kw, gamma, no_fence, sp + i * d, mp + i * d, op + i * d)
    return scaled, mask.astype(bool), omega


def nearest_codeword(kernels, codewords):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(kernels, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(codewords, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t m = c.shape[0]
    cdef Py_ssize_t d = w.shape[1]
    if c.shape[1] != d:
        raise ValueError("kernel and codeword lengths differ")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.empty(n)
    cdef Py_ssize_t i, j, e, best
    cdef double acc, diff, best_d
    for i in prange(n, nogil=True, num_threads=_threads, schedule="static"):
        best = 0
        best_d = 0.0
        for j in range(m):
            acc = 0.0
            for e in range(d):
                diff = c[j, e] - w[i, e]
                acc = acc + diff * diff
            if j == 0 or acc < best_d:
                best = j
                best_d = acc
        idx[i] = best
        dist[i] = best_d
    return idx, dist
