"""Outlier-aware codeword assignment.

The baseline quantizer maps each real kernel to the codeword with the smallest
squared L2 distance. A single large weight can dominate that distance and pull
the choice away from the kernel's sign pattern, so before the search each
kernel's IQR outliers are divided by the mean absolute difference to their
4-neighbours.

Per-kernel functions take a 2-D ``(k_h, k_w)`` array and use 0-based
``(row, col)`` coordinates. Layer-level functions run on the compiled kernels
in :mod:`subbitsnn._ext`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._ext import quant as _quant
from ._ext._quant_py import quartiles
from .binarize import check_compressible
from .codebook import CompactCodebook

DEFAULT_GAMMA = 1.5
# fence multipliers swept in the gamma sensitivity study
GAMMA_SWEEP = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)


class DegenerateOmegaError(ValueError):
    """An outlier equals all of its neighbours, so it cannot be rescaled."""


@dataclass(frozen=True)
class OutlierBounds:
    q1: float
    q3: float
    gamma: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1

    @property
    def lo(self) -> float:
        return -math.inf if math.isinf(self.gamma) else self.q1 - self.gamma * self.iqr

    @property
    def hi(self) -> float:
        return math.inf if math.isinf(self.gamma) else self.q3 + self.gamma * self.iqr


@dataclass
class OutlierReport:
    coords: set[tuple[int, int]] = field(default_factory=set)
    omega: dict[tuple[int, int], float] = field(default_factory=dict)


@dataclass
class QuantAssignment:
    """Codeword index and squared distance at the argmin, per kernel."""

    index: np.ndarray
    distance: np.ndarray

    def __len__(self) -> int:
        return len(self.index)


def _as_kernel(kernel) -> np.ndarray:
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] < 2 or k.shape[1] < 2:
        raise ValueError(f"kernel must be 2-D with both sides > 1, got shape {k.shape}")
    return k


def outlier_bounds(kernel, gamma: float = DEFAULT_GAMMA) -> OutlierBounds:
    """Tukey fences from linearly interpolated quartiles (positions q*(n-1))."""
    flat = np.sort(np.asarray(kernel, dtype=np.float64).reshape(-1))
    if flat.size < 4:
        raise ValueError("need at least 4 weights for quartiles")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    q1, q3 = quartiles(flat)
    return OutlierBounds(float(q1), float(q3), float(gamma))


def detect_outliers(kernel, bounds: OutlierBounds) -> set[tuple[int, int]]:
    k = np.asarray(kernel, dtype=np.float64)
    rows, cols = np.nonzero((k < bounds.lo) | (k > bounds.hi))
    return {(int(i), int(j)) for i, j in zip(rows, cols)}


def neighbours(shape, coord) -> list[tuple[int, int]]:
    """In-bounds 4-neighbours, ordered up, down, left, right."""
    kh, kw = shape
    i, j = coord
    cand = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
    return [(p, q) for p, q in cand if 0 <= p < kh and 0 <= q < kw]


def omega(kernel, coord) -> float:
    """Mean absolute difference between a weight and its 4-neighbours."""
    k = _as_kernel(kernel)
    i, j = coord
    if not (0 <= i < k.shape[0] and 0 <= j < k.shape[1]):
        raise IndexError(f"{coord} outside a {k.shape} kernel")
    acc = 0.0
    nb = neighbours(k.shape, coord)
    for p, q in nb:
        acc = acc + abs(k[i, j] - k[p, q])
    value = acc / len(nb)
    if value == 0.0:
        raise DegenerateOmegaError(f"degenerate omega at {coord}: weight equals all neighbours")
    return value


def outlier_report(kernel, gamma: float = DEFAULT_GAMMA) -> OutlierReport:
    k = _as_kernel(kernel)
    coords = detect_outliers(k, outlier_bounds(k, gamma))
    return OutlierReport(coords, {c: omega(k, c) for c in sorted(coords)})


def scale_outliers(kernel, report: OutlierReport) -> np.ndarray:
    k = _as_kernel(kernel)
    out = k.copy()
    for c in report.coords:
        om = report.omega[c] if c in report.omega else omega(k, c)
        if om <= 0:
            raise DegenerateOmegaError(f"degenerate omega at {c}")
        out[c] = k[c] / om
    return out


def _codeword_matrix(cb: CompactCodebook) -> np.ndarray:
    return cb.codewords.reshape(cb.size, -1).astype(np.float64)


def assign_baseline(kernel, cb: CompactCodebook) -> QuantAssignment:
    """Nearest codeword by squared L2 on the raw kernel."""
    k = _as_kernel(kernel)
    if k.shape != cb.kernel_shape:
        raise ValueError(f"kernel shape {k.shape} does not match codebook {cb.kernel_shape}")
    idx, dist = _quant.nearest_codeword(k.reshape(1, -1), _codeword_matrix(cb))
    return QuantAssignment(idx, dist)


def assign_osquant(kernel, cb: CompactCodebook, gamma: float = DEFAULT_GAMMA) -> QuantAssignment:
    """Nearest codeword after rescaling the kernel's outliers."""
    k = _as_kernel(kernel)
    adjusted = scale_outliers(k, outlier_report(k, gamma))
    return assign_baseline(adjusted, cb)


def ste_backward(grad_out, w_b) -> np.ndarray:
    """Straight-through gradient, masked by ``|w_b| <= 1``.

    For codeword entries (exactly +-1) the mask is all ones; it is kept so the
    function is also correct for callers passing scaled or relaxed weights.
    """
    grad_out = np.asarray(grad_out, dtype=np.float64)
    w_b = np.asarray(w_b)
    if grad_out.shape != w_b.shape:
        raise ValueError("gradient and weight shapes differ")
    return grad_out * (np.abs(w_b) <= 1)


def scaled_ste_backward(grad_out, w_b, omega_map) -> np.ndarray:
    """STE followed by the diagonal 1/omega Jacobian of the outlier scaling.

    ``omega_map`` holds omega at rescaled outliers and 1 elsewhere; entries <= 0
    (degenerate outliers that were left unscaled) pass through unchanged.
    """
    g = ste_backward(grad_out, w_b)
    om = np.asarray(omega_map, dtype=np.float64)
    return np.where(om > 0, g / np.where(om > 0, om, 1.0), g)


@dataclass
class LayerQuantization:
    """OS-Quant (or baseline) result for every kernel of one conv layer."""

    index: np.ndarray  # (c_out, c_in)
    distance: np.ndarray  # (c_out, c_in)
    adjusted: np.ndarray  # (c_out, c_in, k_h, k_w)
    outliers: np.ndarray  # bool, same shape as adjusted
    omega: np.ndarray  # 1 at non-outliers, 0 at degenerate outliers

    def binary_weights(self, cb: CompactCodebook) -> np.ndarray:
        return cb.codewords[self.index]

    @property
    def outlier_fraction(self) -> float:
        c_out, c_in = self.index.shape
        per_kernel = self.outliers.reshape(c_out * c_in, -1).any(axis=1)
        return float(per_kernel.mean()) if per_kernel.size else 0.0


def quantize_layer(w_f, cb: CompactCodebook, gamma: float | None = DEFAULT_GAMMA) -> LayerQuantization:
    """Assign every kernel of a ``(c_out, c_in, k, k)`` layer.

    ``gamma=None`` runs the baseline quantizer; ``gamma=inf`` disables outlier
    detection and gives the same assignment. Degenerate outliers are left
    unscaled rather than raising.
    """
    w = np.asarray(w_f, dtype=np.float64)
    check_compressible(w.shape)
    c_out, c_in, kh, kw = w.shape
    if (kh, kw) != cb.kernel_shape:
        raise ValueError(f"layer kernels {kh}x{kw} do not match codebook {cb.kernel_shape}")
    kernels = w.reshape(c_out * c_in, kh, kw)
    if gamma is None:
        adjusted, mask, om = kernels, np.zeros(kernels.shape, bool), np.ones(kernels.shape)
    else:
        adjusted, mask, om = _quant.osquant_scale(kernels, float(gamma))
    idx, dist = _quant.nearest_codeword(adjusted.reshape(c_out * c_in, -1), _codeword_matrix(cb))
    return LayerQuantization(
        idx.reshape(c_out, c_in),
        dist.reshape(c_out, c_in),
        adjusted.reshape(w.shape),
        np.asarray(mask, bool).reshape(w.shape),
        om.reshape(w.shape),
    )


def outlier_occurrence(layer, gamma: float = DEFAULT_GAMMA) -> float:
    """Fraction of kernels in a layer that contain at least one outlier."""
    w = np.asarray(layer, dtype=np.float64)
    check_compressible(w.shape)
    c_out, c_in, kh, kw = w.shape
    if c_out * c_in == 0:
        return 0.0
    _, mask, _ = _quant.osquant_scale(w.reshape(c_out * c_in, kh, kw), float(gamma))
    return float(np.asarray(mask).reshape(c_out * c_in, -1).any(axis=1).mean())


def outlier_rows(layer_name: str, layer, gamma: float = DEFAULT_GAMMA) -> list[str]:
    """CSV rows ``layer,kernel_index,i,j,value,omega`` for every detected outlier."""
    w = np.asarray(layer, dtype=np.float64)
    c_out, c_in, kh, kw = w.shape
    kernels = w.reshape(c_out * c_in, kh, kw)
    _, mask, om = _quant.osquant_scale(kernels, float(gamma))
    rows = []
    for n, i, j in zip(*np.nonzero(mask)):
        rows.append(f"{layer_name},{n},{i},{j},{kernels[n, i, j]:.9g},{om[n, i, j]:.9g}")
    return rows
