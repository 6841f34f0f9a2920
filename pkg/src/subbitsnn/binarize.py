"""Sign binarization of convolution weights with per-output-channel scales."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BinaryConvWeights:
    """``signs`` is int8 ``(c_out, c_in, k_h, k_w)`` in {-1, +1}; ``alpha`` is ``(c_out,)``."""

    signs: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.int8)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.signs.ndim != 4:
            raise ValueError(f"binary weights must be 4-D, got shape {self.signs.shape}")
        if self.alpha.shape != (self.signs.shape[0],):
            raise ValueError("alpha must have one entry per output channel")
        if not np.all(np.abs(self.signs) == 1):
            raise ValueError("binary weights must be +1 or -1")

    @property
    def shape(self):
        return self.signs.shape

    def dense(self) -> np.ndarray:
        """alpha * sign(w) as float64."""
        return self.alpha[:, None, None, None] * self.signs


def sign(w) -> np.ndarray:
    """-1 where w < 0, +1 otherwise (zero maps to +1)."""
    return np.where(np.asarray(w) < 0, -1, 1).astype(np.int8)


def channel_scale(w) -> np.ndarray:
    """Mean absolute weight per output channel."""
    w = np.asarray(w, dtype=np.float64)
    return np.abs(w).reshape(w.shape[0], -1).mean(axis=1)


def sign_binarize(w) -> BinaryConvWeights:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 4:
        raise ValueError(f"expected (c_out, c_in, k_h, k_w) weights, got shape {w.shape}")
    return BinaryConvWeights(sign(w), channel_scale(w))


def is_compressible(shape) -> bool:
    """Square kernels with side > 1 are eligible for codebook compression."""
    return len(shape) == 4 and shape[2] == shape[3] and shape[2] > 1


def check_compressible(shape) -> None:
    if not is_compressible(shape):
        raise ValueError(f"layer shape {tuple(shape)} is not a square kernel with side > 1")
