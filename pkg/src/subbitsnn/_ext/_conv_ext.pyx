# cython: language_level=3
"""Compiled popcount convolutions; see _conv_py.py for the reference semantics.

Each receptive field (one input channel, k*k taps) is packed into a uint64 with
tap ``r*k + q`` at bit ``r*k + q``. For +-1 weights with bit set on +1 and a
{0,1} patch, dot = 2*popcount(patch & w) - popcount(patch).
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cdef int _threads = 1


def set_num_threads(int n):
    global _threads
    _threads = max(1, n)


def _pack_patches(spikes, int k):
    cdef cnp.ndarray[cnp.uint8_t, ndim=4] s = np.ascontiguousarray(spikes, dtype=np.uint8)
    cdef Py_ssize_t b = s.shape[0], c = s.shape[1], h = s.shape[2], w = s.shape[3]
    cdef cnp.ndarray[cnp.uint64_t, ndim=4] bits = np.zeros((b, c, h, w), dtype=np.uint64)
    cdef cnp.ndarray[cnp.int32_t, ndim=4] counts = np.zeros((b, c, h, w), dtype=np.int32)
    cdef int p = k // 2
    cdef Py_ssize_t bi, ci, y, x, yy, xx
    cdef int r, q
    cdef uint64_t acc
    for bi in prange(b, nogil=True, num_threads=_threads, schedule="static"):
        for ci in range(c):
            for y in range(h):
                for x in range(w):
                    acc = 0
                    for r in range(k):
                        yy = y + r - p
                        if yy < 0 or yy >= h:
                            continue
                        for q in range(k):
                            xx = x + q - p
                            if xx < 0 or xx >= w:
                                continue
                            if s[bi, ci, yy, xx]:
                                acc = acc | ((<uint64_t>1) << (r * k + q))
                    bits[bi, ci, y, x] = acc
                    counts[bi, ci, y, x] = __builtin_popcountll(acc)
    return bits, counts


def _kernel_bits(kernels):
    """+-1 kernels ``(n, k, k)`` -> uint64 with bit set where +1."""
    flat = (np.asarray(kernels).reshape(len(kernels), -1) > 0).astype(np.uint64)
    shifts = np.arange(flat.shape[1], dtype=np.uint64)
    return (flat << shifts).sum(axis=1, dtype=np.uint64)


def _channel_last(bits_np, counts_np):
    """``(b, c, h, w)`` patch words -> ``(b, h*w, c)`` so channel loops are contiguous."""
    b, c, h, w = bits_np.shape
    return (
        np.ascontiguousarray(bits_np.reshape(b, c, h * w).transpose(0, 2, 1)),
        np.ascontiguousarray(counts_np.reshape(b, c, h * w).transpose(0, 2, 1)),
    )


def binary_conv_int(spikes, signs):
    signs = np.asarray(signs)
    cdef Py_ssize_t c_out = signs.shape[0], c_in = signs.shape[1]
    cdef int k = signs.shape[2]
    if k * k > 64:
        raise ValueError("kernel too large for compiled path")
    bits_np, counts_np = _pack_patches(spikes, k)
    cdef Py_ssize_t b = bits_np.shape[0], h = bits_np.shape[2], w = bits_np.shape[3]
    cdef Py_ssize_t npos = h * w
    bits_cl, counts_cl = _channel_last(bits_np, counts_np)
    cdef cnp.uint64_t[:, :, ::1] pbits = bits_cl
    cdef cnp.int32_t[:, :, ::1] pcnt = counts_cl
    cdef cnp.uint64_t[:, ::1] wbits = _kernel_bits(signs.reshape(c_out * c_in, k, k)).reshape(c_out, c_in)
    out_np = np.zeros((b, c_out, h, w), dtype=np.int64)
    cdef int64_t[:, :, ::1] out = out_np.reshape(b, c_out, npos)
    cdef Py_ssize_t bi, co, ci, pos
    cdef int64_t acc, total
    for bi in prange(b, nogil=True, num_threads=_threads, schedule="static"):
        for pos in range(npos):
            total = 0
            for ci in range(c_in):
                total = total + pcnt[bi, pos, ci]
            for co in range(c_out):
                acc = 0
                for ci in range(c_in):
                    acc = acc + __builtin_popcountll(pbits[bi, pos, ci] & wbits[co, ci])
                out[bi, co, pos] = 2 * acc - total
    # one kernel-pattern evaluation and one accumulation per (b, co, ci, position)
    evals = b * c_out * c_in * npos
    return out_np, evals, evals


def _column_slots(indices, codewords):
    """Per input channel: distinct codeword bits and each output's slot among them."""
    c_out, c_in = indices.shape
    ndist = np.zeros(c_in, dtype=np.int64)
    slot = np.zeros((c_out, c_in), dtype=np.int64)
    columns = []
    for ci in range(c_in):
        distinct, inverse = np.unique(indices[:, ci], return_inverse=True)
        ndist[ci] = len(distinct)
        slot[:, ci] = inverse
        columns.append(distinct)
    width = max(int(ndist.max()) if c_in else 0, 1)
    cwbits = _kernel_bits(codewords)
    dist_bits = np.zeros((c_in, width), dtype=np.uint64)
    for ci in range(c_in):
        dist_bits[ci, : ndist[ci]] = cwbits[columns[ci]]
    return ndist, slot, dist_bits


def subbit_conv_int(spikes, indices, codewords):
    codewords = np.asarray(codewords)
    indices = np.asarray(indices, dtype=np.int64)
    cdef int k = codewords.shape[1]
    if k * k > 64:
        raise ValueError("kernel too large for compiled path")
    cdef Py_ssize_t c_out = indices.shape[0], c_in = indices.shape[1]

    ndist_np, slot_np, dist_bits_np = _column_slots(indices, codewords)
    bits_np, counts_np = _pack_patches(spikes, k)
    cdef Py_ssize_t b = bits_np.shape[0], h = bits_np.shape[2], w = bits_np.shape[3]
    cdef Py_ssize_t npos = h * w
    bits_cl, counts_cl = _channel_last(bits_np, counts_np)
    cdef cnp.uint64_t[:, :, ::1] pbits = bits_cl
    cdef cnp.int32_t[:, :, ::1] pcnt = counts_cl
    cdef int64_t[::1] ndist = ndist_np
    cdef int64_t[:, ::1] slot = slot_np
    cdef cnp.uint64_t[:, ::1] dbits = dist_bits_np
    cdef Py_ssize_t width = dist_bits_np.shape[1]
    out_np = np.zeros((b, c_out, h, w), dtype=np.int64)
    cdef int64_t[:, :, ::1] out = out_np.reshape(b, c_out, npos)
    # lookup bank for one position: partial sum of every distinct codeword of every input channel
    bank_np = np.zeros((b, c_in, width), dtype=np.int64)
    cdef int64_t[:, :, ::1] bank = bank_np
    cdef Py_ssize_t bi, co, ci, pos, sidx
    cdef int64_t multiplies = 0, acc
    cdef uint64_t patch
    cdef int pc
    for bi in prange(b, nogil=True, num_threads=_threads, schedule="static"):
        for pos in range(npos):
            for ci in range(c_in):
                patch = pbits[bi, pos, ci]
                pc = pcnt[bi, pos, ci]
                for sidx in range(ndist[ci]):
                    bank[bi, ci, sidx] = 2 * __builtin_popcountll(patch & dbits[ci, sidx]) - pc
                multiplies += ndist[ci]
            for co in range(c_out):
                acc = 0
                for ci in range(c_in):
                    acc = acc + bank[bi, ci, slot[co, ci]]
                out[bi, co, pos] = acc
    adds = b * c_out * c_in * npos
    return out_np, multiplies, adds, adds - multiplies
