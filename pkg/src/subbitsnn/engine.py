"""Inference over packed sub-bit layers.

``binary_conv`` is the 1-bit reference: every (output, input channel) kernel is
evaluated against every receptive field. ``subbit_conv`` evaluates, per input
channel and position, only the distinct codewords referenced by that input
channel's column of the index map and serves the remaining output channels
from that lookup bank. Both produce identical integer sums before the alpha
scale.

This module consumes only indices, codewords and scales; it never touches the
assignment or distillation code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._ext import conv as _conv
from .binarize import BinaryConvWeights, check_compressible
from .neuron import LifConfig, LifState, lif_step
from .pack import QuantizedLayer
from .tensor import as_spike_array


@dataclass
class OpCounters:
    """Exact operation counts.

    ``multiplies`` counts bitwise kernel-pattern dot products actually evaluated,
    ``adds`` the per-kernel partial sums accumulated into outputs, and
    ``lut_hits`` the partial sums served from the lookup bank.
    """

    multiplies: int = 0
    adds: int = 0
    lut_hits: int = 0

    def __add__(self, other: OpCounters) -> OpCounters:
        return OpCounters(
            self.multiplies + other.multiplies, self.adds + other.adds, self.lut_hits + other.lut_hits
        )

    def __iadd__(self, other: OpCounters) -> OpCounters:
        self.multiplies += other.multiplies
        self.adds += other.adds
        self.lut_hits += other.lut_hits
        return self


def _check_input(s: np.ndarray, c_in: int, k: int) -> None:
    if s.ndim != 4:
        raise ValueError(f"spikes must be [b, c, h, w], got shape {s.shape}")
    if s.shape[1] != c_in:
        raise ValueError(f"input has {s.shape[1]} channels, weights expect {c_in}")
    if k * k > 64:
        raise ValueError("kernels larger than 8x8 are not supported")


def binary_conv(s, w: BinaryConvWeights, *, with_counters: bool = False):
    """Same-padded stride-1 convolution of {0,1} spikes with alpha*sign weights."""
    spikes = as_spike_array(s)
    check_compressible(w.shape)
    c_out, c_in, k, _ = w.shape
    _check_input(spikes, c_in, k)
    raw, mults, adds = _conv.binary_conv_int(spikes, w.signs)
    out = raw * w.alpha[None, :, None, None]
    if with_counters:
        return out, OpCounters(int(mults), int(adds), 0)
    return out


def binary_conv_int(s, signs) -> np.ndarray:
    """Integer sums of the reference convolution, without alpha."""
    spikes = as_spike_array(s)
    signs = np.asarray(signs, dtype=np.int8)
    _check_input(spikes, signs.shape[1], signs.shape[2])
    return _conv.binary_conv_int(spikes, signs)[0]


def subbit_conv(s, q: QuantizedLayer):
    """Codeword-reuse convolution; returns ``(output, OpCounters)``."""
    spikes = as_spike_array(s)
    c_out, c_in, k, _ = q.shape
    _check_input(spikes, c_in, k)
    raw, mults, adds, hits = _conv.subbit_conv_int(spikes, q.indices, q.codebook.codewords)
    out = raw * q.alpha[None, :, None, None]
    return out, OpCounters(int(mults), int(adds), int(hits))


def reuse_counters(q: QuantizedLayer, batch: int, height: int, width: int) -> OpCounters:
    """Counters ``subbit_conv`` would report for an input of the given size.

    They depend only on the index map, so no spikes are needed.
    """
    positions = batch * height * width
    c_out, c_in = q.indices.shape
    distinct = sum(len(np.unique(q.indices[:, ci])) for ci in range(c_in))
    mults = positions * distinct
    adds = positions * c_out * c_in
    return OpCounters(mults, adds, adds - mults)


def linear(x, weight, bias=None) -> np.ndarray:
    out = np.asarray(x, dtype=np.float64) @ np.asarray(weight, dtype=np.float64).T
    return out if bias is None else out + bias


def binary_linear(s, signs, alpha) -> np.ndarray:
    """Fully connected layer with +-1 weights and per-output scale."""
    x = as_spike_array(s).reshape(np.shape(s)[0], -1).astype(np.int64)
    return (x @ np.asarray(signs, dtype=np.int64).T) * np.asarray(alpha, dtype=np.float64)


@dataclass
class OpCount:
    flops: list[int]
    sops: list[float]

    @property
    def total_flops(self) -> int:
        return sum(self.flops)

    @property
    def total_sops(self) -> float:
        return sum(self.sops)


def conv_flops(c_out: int, c_in: int, k_h: int, k_w: int, height: int, width: int) -> int:
    """Two operations per multiply-accumulate, same-padded stride-1 output."""
    return 2 * k_h * k_w * c_in * c_out * height * width


def _layer_shapes(model) -> list[tuple[int, int, int, int]]:
    shapes = []
    for layer in model:
        shapes.append(tuple(layer.shape) if hasattr(layer, "shape") else tuple(layer))
    return shapes


def count_ops(model, input_shape, T: int, fr: float) -> OpCount:
    """Per-layer FLOPs for one timestep and SOPs = fr * T * FLOPs.

    ``input_shape`` is ``(c, h, w)`` or ``(b, c, h, w)``; spatial size is
    preserved from layer to layer.
    """
    if not 0.0 <= fr <= 1.0:
        raise ValueError("firing rate must lie in [0, 1]")
    if T < 1:
        raise ValueError("T must be at least 1")
    dims = tuple(input_shape)
    if len(dims) == 3:
        dims = (1,) + dims
    b, c, h, w = dims
    flops = []
    for c_out, c_in, k_h, k_w in _layer_shapes(model):
        if c_in != c:
            raise ValueError(f"layer expects {c_in} input channels, previous layer provides {c}")
        flops.append(b * conv_flops(c_out, c_in, k_h, k_w, h, w))
        c = c_out
    return OpCount(flops, [fr * T * f for f in flops])


@dataclass
class InferenceLayer:
    """A packed conv layer plus the folded batch-norm affine on its drive."""

    q: QuantizedLayer
    scale: np.ndarray | None = None
    shift: np.ndarray | None = None

    def drive(self, conv_out: np.ndarray) -> np.ndarray:
        if self.scale is None:
            return conv_out
        return conv_out * self.scale[None, :, None, None] + self.shift[None, :, None, None]


@dataclass
class InferenceNet:
    """Conv stack of packed layers with LIF neurons and an optional real readout.

    Without a readout the logits are the time-averaged spike rates of the last
    layer pooled over space.
    """

    layers: list[InferenceLayer]
    lif: LifConfig = field(default_factory=LifConfig)
    readout_weight: np.ndarray | None = None
    readout_bias: np.ndarray | None = None

    def run(self, spikes, *, reference: bool = False):
        """Run ``[T, b, c, h, w]`` input spikes.

        With ``reference=True`` each layer uses ``binary_conv`` on its
        reconstructed weights instead of the codeword-reuse path. Returns
        ``(logits, OpCounters, last_layer_spikes)``.
        """
        x = np.asarray(spikes)
        if x.ndim != 5:
            raise ValueError("input spikes must be [T, b, c, h, w]")
        T = x.shape[0]
        counters = OpCounters()
        states: list[LifState | None] = [None] * len(self.layers)
        rate = None
        for t in range(T):
            s = as_spike_array(x[t])
            for li, layer in enumerate(self.layers):
                if reference:
                    out, ops = binary_conv(s, layer.q.reconstruct(), with_counters=True)
                else:
                    out, ops = subbit_conv(s, layer.q)
                counters += ops
                current = layer.drive(out)
                if states[li] is None:
                    states[li] = LifState.zeros(current.shape)
                s, states[li] = lif_step(states[li], current, self.lif)
            rate = s.astype(np.float64) if rate is None else rate + s
        rate = rate / T
        if self.readout_weight is not None:
            logits = linear(rate.reshape(rate.shape[0], -1), self.readout_weight, self.readout_bias)
        else:
            logits = rate.mean(axis=(2, 3))
        return logits, counters, rate
