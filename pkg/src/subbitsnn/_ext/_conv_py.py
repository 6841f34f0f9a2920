"""Numpy reference for the binary and codeword-reuse convolutions.

Stride 1, zero "same" padding, cross-correlation orientation. Weights are +-1,
inputs are {0,1} spikes, outputs are exact integers.
"""

import numpy as np


def patches(spikes: np.ndarray, k: int) -> np.ndarray:
    """Zero-padded receptive fields, ``(b, c, H, W, k*k)`` in row-major kernel order."""
    b, c, h, w = spikes.shape
    p = k // 2
    padded = np.zeros((b, c, h + 2 * p, w + 2 * p), dtype=np.int64)
    padded[:, :, p : p + h, p : p + w] = spikes
    out = np.empty((b, c, h, w, k * k), dtype=np.int64)
    for r in range(k):
        for q in range(k):
            out[..., r * k + q] = padded[:, :, r : r + h, q : q + w]
    return out


def binary_conv_int(spikes: np.ndarray, signs: np.ndarray):
    """Returns ``(out, multiplies, adds)``."""
    c_out, c_in, k, _ = signs.shape
    b, _, h, w = spikes.shape
    pt = patches(spikes, k)
    out = np.einsum("bchwe,oce->bohw", pt, signs.reshape(c_out, c_in, k * k).astype(np.int64))
    evals = b * c_out * c_in * h * w
    return out.astype(np.int64), evals, evals


def subbit_conv_int(spikes: np.ndarray, indices: np.ndarray, codewords: np.ndarray):
    """Evaluate each distinct codeword of an input channel once per position.

    Returns ``(out, multiplies, adds, lut_hits)``.
    """
    m, k, _ = codewords.shape
    c_out, c_in = indices.shape
    b, _, h, w = spikes.shape
    pt = patches(spikes, k)
    flat_cw = codewords.reshape(m, k * k).astype(np.int64)
    out = np.zeros((b, c_out, h, w), dtype=np.int64)
    multiplies = 0
    for ci in range(c_in):
        column = indices[:, ci]
        distinct, slot = np.unique(column, return_inverse=True)
        bank = pt[:, ci] @ flat_cw[distinct].T  # (b, h, w, n_distinct)
        out += np.moveaxis(bank[..., slot], -1, 1)
        multiplies += b * h * w * len(distinct)
    adds = b * c_out * c_in * h * w
    return out, multiplies, adds, adds - multiplies
