"""Dense and bit-packed 4-D activation containers.

Both containers are row-major ``[batch, channel, height, width]``. The numeric
core works on plain numpy arrays; these classes exist for the places where a
fixed layout matters (spike counting, serialization) and expose ``__array__``
so they can be handed to any function that accepts an array.
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

Shape4 = tuple[int, int, int, int]


def _check_shape(shape) -> Shape4:
    shape = tuple(int(d) for d in shape)
    if len(shape) != 4 or any(d < 0 for d in shape):
        raise ValueError(f"expected 4 non-negative dimensions, got {shape}")
    return shape  # type: ignore[return-value]


class Tensor4:
    """Real-valued 4-D tensor, float64 unless told otherwise."""

    __slots__ = ("data",)

    def __init__(self, data, dtype=np.float64):
        arr = np.ascontiguousarray(data, dtype=dtype)
        _check_shape(arr.shape)
        self.data = arr

    @classmethod
    def zeros(cls, shape, dtype=np.float64) -> Tensor4:
        return cls(np.zeros(_check_shape(shape), dtype=dtype), dtype=dtype)

    @property
    def shape(self) -> Shape4:
        return self.data.shape  # type: ignore[return-value]

    def __len__(self) -> int:
        return self.data.shape[0]

    def get(self, i: int, j: int, k: int, l: int) -> float:
        return float(self.data[i, j, k, l])

    def set(self, i: int, j: int, k: int, l: int, value: float) -> None:
        self.data[i, j, k, l] = value

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor4):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __repr__(self) -> str:
        return f"Tensor4(shape={self.shape})"


class SpikeTensor:
    """Binary 4-D tensor stored eight spikes per byte.

    Packing is row-major over the flattened tensor, least significant bit
    first, so the byte layout is reproducible across platforms.
    """

    __slots__ = ("shape", "bits")

    def __init__(self, shape, bits: np.ndarray):
        self.shape = _check_shape(shape)
        n = int(np.prod(self.shape))
        bits = np.ascontiguousarray(bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size != (n + 7) // 8:
            raise ValueError(f"need {(n + 7) // 8} packed bytes for shape {self.shape}, got {bits.size}")
        self.bits = bits

    @classmethod
    def from_array(cls, spikes) -> SpikeTensor:
        arr = np.asarray(spikes)
        shape = _check_shape(arr.shape)
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("spike tensor values must be 0 or 1")
            arr = arr.astype(np.bool_)
        return cls(shape, np.packbits(arr.reshape(-1), bitorder="little"))

    def to_array(self) -> np.ndarray:
        n = int(np.prod(self.shape))
        flat = np.unpackbits(self.bits, count=n, bitorder="little")
        return flat.reshape(self.shape)

    def count(self) -> int:
        """Number of spikes (popcount over the packed bytes)."""
        return int(np.unpackbits(self.bits).sum())

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def __array__(self, dtype=None, copy=None):
        arr = self.to_array()
        return arr if dtype is None else arr.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpikeTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self) -> str:
        return f"SpikeTensor(shape={self.shape}, spikes={self.count()})"


def as_spike_array(s) -> np.ndarray:
    """Return spikes as a uint8 {0,1} array, accepting SpikeTensor or array input."""
    if isinstance(s, SpikeTensor):
        return s.to_array()
    arr = np.asarray(s)
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    out = arr.astype(np.uint8)
    if not np.array_equal(out, arr):
        raise ValueError("spike values must be 0 or 1")
    if out.size and out.max() > 1:
        raise ValueError("spike values must be 0 or 1")
    return out


def firing_rate(spikes: Iterable) -> float:
    """Fraction of neuron-timesteps that fired over a sequence of spike tensors."""
    total = 0
    count = 0
    shape = None
    for s in spikes:
        if isinstance(s, SpikeTensor):
            n_spk, this_shape = s.count(), s.shape
        else:
            arr = as_spike_array(s)
            n_spk, this_shape = int(arr.sum()), arr.shape
        if shape is None:
            shape = this_shape
        elif this_shape != shape:
            raise ValueError(f"timestep shape {this_shape} differs from {shape}")
        total += n_spk
        count += 1
    if count == 0:
        raise ValueError("no timesteps")
    n = int(np.prod(shape))
    return total / (count * n) if n else 0.0
