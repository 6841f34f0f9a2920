"""Numpy reference for the quantizer kernels.

Arithmetic is ordered exactly as in ``_quant_ext.pyx`` (sequential sums over
kernel elements, fixed neighbour order) so both backends agree bit for bit.
"""

import math

import numpy as np

_CHUNK = 8192


def quartiles(sorted_vals: np.ndarray):
    """Linear-interpolation Q1/Q3 along the last axis of an already sorted array."""
    n = sorted_vals.shape[-1]
    out = []
    for q in (0.25, 0.75):
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        frac = pos - lo
        v = sorted_vals[..., lo]
        if frac > 0.0:
            v = v + frac * (sorted_vals[..., lo + 1] - v)
        out.append(v)
    return out[0], out[1]


def fences(kernels: np.ndarray, gamma: float):
    """Per-kernel ``(q1, q3, lo, hi)`` for a ``(n, d)`` stack."""
    q1, q3 = quartiles(np.sort(kernels, axis=-1))
    if math.isinf(gamma):
        lo = np.full_like(q1, -math.inf)
        hi = np.full_like(q3, math.inf)
    else:
        iqr = q3 - q1
        lo = q1 - gamma * iqr
        hi = q3 + gamma * iqr
    return q1, q3, lo, hi


def osquant_scale(kernels: np.ndarray, gamma: float):
    """Detect IQR outliers per kernel and divide each by its neighbour spread.

    Args:
        kernels: ``(n, k_h, k_w)`` float64.
        gamma: fence multiplier; ``inf`` disables detection.

    Returns:
        ``(scaled, outlier_mask, omega)``. ``omega`` is 1 at non-outliers and 0
        at degenerate outliers, which are left unscaled.
    """
    kernels = np.ascontiguousarray(kernels, dtype=np.float64)
    n, kh, kw = kernels.shape
    flat = kernels.reshape(n, kh * kw)
    _, _, lo, hi = fences(flat, gamma)
    mask = (kernels < lo[:, None, None]) | (kernels > hi[:, None, None])

    acc = np.zeros_like(kernels)
    cnt = np.zeros((kh, kw))
    # neighbour order: up, down, left, right
    for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        valid = np.zeros((kh, kw), dtype=bool)
        shifted = np.zeros_like(kernels)
        r0, r1 = max(0, -di), kh - max(0, di)
        c0, c1 = max(0, -dj), kw - max(0, dj)
        valid[r0:r1, c0:c1] = True
        shifted[:, r0:r1, c0:c1] = kernels[:, r0 + di : r1 + di, c0 + dj : c1 + dj]
        acc = np.where(valid, acc + np.abs(kernels - shifted), acc)
        cnt += valid
    omega_all = acc / cnt

    omega = np.where(mask, omega_all, 1.0)
    scalable = mask & (omega_all > 0.0)
    scaled = np.where(scalable, kernels / np.where(scalable, omega_all, 1.0), kernels)
    return scaled, mask, omega


def nearest_codeword(kernels: np.ndarray, codewords: np.ndarray):
    """Exhaustive squared-L2 argmin, ties to the lowest codeword index.

    Args:
        kernels: ``(n, d)`` float64.
        codewords: ``(m, d)`` float64.

    Returns:
        ``(indices int64 (n,), distances float64 (n,))``.
    """
    kernels = np.ascontiguousarray(kernels, dtype=np.float64)
    codewords = np.ascontiguousarray(codewords, dtype=np.float64)
    n, d = kernels.shape
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for start in range(0, n, _CHUNK):
        w = kernels[start : start + _CHUNK]
        acc = np.zeros((w.shape[0], codewords.shape[0]))
        for e in range(d):
            diff = codewords[None, :, e] - w[:, None, e]
            acc += diff * diff
        best = np.argmin(acc, axis=1)
        idx[start : start + _CHUNK] = best
        dist[start : start + _CHUNK] = acc[np.arange(w.shape[0]), best]
    return idx, dist
