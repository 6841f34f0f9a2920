"""``.s2nn`` serialization of codebook-quantized conv layers.

Layout (all integers little-endian)::

    b"S2NN"  u16 version  u16 layer_count
    per layer:
        u32 c_out  u32 c_in  u8 k_h  u8 k_w  u8 eta
        codebook  ceil(2**eta * k_h*k_w / 8) bytes
        indices   ceil(c_out*c_in * eta / 8) bytes
        alpha     c_out x float32

Bit streams are packed LSB first. The codebook stream holds codeword ``i``'s
element ``e`` (row-major, +1 -> 1) at bit ``i*k_h*k_w + e``; the index stream
holds kernel ``n = o*c_in + c``'s index in bits ``[n*eta, (n+1)*eta)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .binarize import BinaryConvWeights
from .codebook import CompactCodebook, NotSubBitError

MAGIC = b"S2NN"
VERSION = 1
_HEADER = struct.Struct("<4sHH")
_LAYER = struct.Struct("<IIBBB")


class PackError(ValueError):
    pass


class BadMagicError(PackError):
    pass


class VersionError(PackError):
    pass


class TruncatedError(PackError):
    pass


class IndexRangeError(PackError):
    pass


@dataclass
class QuantizedLayer:
    """Per-kernel codeword indices, the layer codebook and output-channel scales."""

    codebook: CompactCodebook
    indices: np.ndarray  # (c_out, c_in)
    alpha: np.ndarray  # (c_out,)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        if self.indices.ndim != 2:
            raise ValueError("indices must be shaped (c_out, c_in)")
        if self.alpha.shape != (self.indices.shape[0],):
            raise ValueError("alpha must have one entry per output channel")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.codebook.size):
            raise IndexRangeError(f"codeword index outside [0, {self.codebook.size})")

    @property
    def eta(self) -> int:
        return self.codebook.eta

    @property
    def shape(self) -> tuple[int, int, int, int]:
        k_h, k_w = self.codebook.kernel_shape
        return (self.indices.shape[0], self.indices.shape[1], k_h, k_w)

    def reconstruct(self) -> BinaryConvWeights:
        return BinaryConvWeights(self.codebook.codewords[self.indices], self.alpha)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantizedLayer):
            return NotImplemented
        return (
            self.eta == other.eta
            and np.array_equal(self.codebook.codewords, other.codebook.codewords)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.alpha, other.alpha)
        )


def _pack_fields(values: np.ndarray, width: int) -> bytes:
    values = np.asarray(values, dtype=np.uint64).reshape(-1)
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((values[:, None] >> shifts[None, :]) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.reshape(-1), bitorder="little").tobytes()


def _unpack_fields(buf: bytes, count: int, width: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), count=count * width, bitorder="little")
    bits = bits.reshape(count, width).astype(np.uint64)
    return (bits << np.arange(width, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


def codebook_bytes(eta: int, k_h: int, k_w: int) -> int:
    return math.ceil((1 << eta) * k_h * k_w / 8)


def index_bytes(c_out: int, c_in: int, eta: int) -> int:
    return math.ceil(c_out * c_in * eta / 8)


def _encode_layer(layer: QuantizedLayer) -> bytes:
    c_out, c_in, k_h, k_w = layer.shape
    eta = layer.eta
    if layer.indices.size and layer.indices.max() >= 1 << eta:
        raise IndexRangeError(f"index {layer.indices.max()} does not fit in {eta} bits")
    cw_bits = (layer.codebook.codewords.reshape(-1) > 0).astype(np.uint8)
    out = [
        _LAYER.pack(c_out, c_in, k_h, k_w, eta),
        np.packbits(cw_bits, bitorder="little").tobytes(),
        _pack_fields(layer.indices, eta),
        layer.alpha.astype("<f4").tobytes(),
    ]
    return b"".join(out)


def pack(layers) -> bytes:
    layers = list(layers)
    if len(layers) > 0xFFFF:
        raise PackError("too many layers")
    return _HEADER.pack(MAGIC, VERSION, len(layers)) + b"".join(_encode_layer(l) for l in layers)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"truncated stream while reading {what} at byte {self.pos}")
        chunk = bytes(self.data[self.pos : self.pos + n])
        self.pos += n
        return chunk


def read_header(data: bytes) -> tuple[int, int]:
    """Validate the file header; returns ``(version, layer_count)``."""
    if len(data) < 4 or bytes(data[:4]) != MAGIC:
        raise BadMagicError("bad magic: not an .s2nn stream")
    if len(data) < _HEADER.size:
        raise TruncatedError("truncated stream while reading file header")
    _, version, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported .s2nn version {version} (expected {VERSION})")
    return version, count


def unpack(data: bytes) -> list[QuantizedLayer]:
    """Decode a whole stream or raise; never returns a partial model."""
    _, count = read_header(data)
    r = _Reader(data)
    r.pos = _HEADER.size
    layers = []
    for li in range(count):
        c_out, c_in, k_h, k_w, eta = _LAYER.unpack(r.take(_LAYER.size, f"layer {li} header"))
        n_cw = 1 << eta
        if eta >= k_h * k_w or eta < 1:
            raise PackError(f"layer {li}: eta={eta} is not sub-bit for {k_h}x{k_w}")
        cw_raw = r.take(codebook_bytes(eta, k_h, k_w), f"layer {li} codebook")
        cw_bits = np.unpackbits(np.frombuffer(cw_raw, dtype=np.uint8), count=n_cw * k_h * k_w, bitorder="little")
        codewords = (cw_bits.astype(np.int8) * 2 - 1).reshape(n_cw, k_h, k_w)
        idx_raw = r.take(index_bytes(c_out, c_in, eta), f"layer {li} indices")
        indices = _unpack_fields(idx_raw, c_out * c_in, eta).astype(np.int64).reshape(c_out, c_in)
        alpha = np.frombuffer(r.take(4 * c_out, f"layer {li} alpha"), dtype="<f4").astype(np.float64)
        try:
            cb = CompactCodebook(eta, codewords)
        except (ValueError, NotSubBitError) as exc:
            raise PackError(f"layer {li}: invalid codebook ({exc})") from exc
        layers.append(QuantizedLayer(cb, indices, alpha))
    if r.pos != len(r.data):
        raise PackError(f"{len(r.data) - r.pos} trailing bytes after last layer")
    return layers


def save(path, layers) -> None:
    with open(path, "wb") as fh:
        fh.write(pack(layers))


def load(path) -> list[QuantizedLayer]:
    with open(path, "rb") as fh:
        return unpack(fh.read())


def dump_header(data: bytes) -> str:
    """Human-readable header listing, one line per layer."""
    version, count = read_header(data)
    lines = [f"magic=S2NN version={version} layers={count}"]
    for i, layer in enumerate(unpack(data)):
        c_out, c_in, k_h, k_w = layer.shape
        lines.append(
            f"layer {i}: c_out={c_out} c_in={c_in} k={k_h}x{k_w} eta={layer.eta} "
            f"codebook_bytes={codebook_bytes(layer.eta, k_h, k_w)} "
            f"index_bytes={index_bytes(c_out, c_in, layer.eta)} alpha_bytes={4 * c_out}"
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class CompressionRatio:
    """Bits per weight. ``exact`` counts indices + codebook only; ``inclusive`` adds alpha and headers."""

    exact: float
    inclusive: float


def layer_bits(c_out: int, c_in: int, k_h: int, k_w: int, eta: int) -> int:
    """Index plus codebook bits for one layer."""
    return c_out * c_in * eta + (1 << eta) * k_h * k_w


def compression_ratio(layer) -> CompressionRatio:
    """Accepts a QuantizedLayer or a ``(c_out, c_in, k_h, k_w, eta)`` tuple."""
    if isinstance(layer, QuantizedLayer):
        c_out, c_in, k_h, k_w = layer.shape
        eta = layer.eta
    else:
        c_out, c_in, k_h, k_w, eta = layer
    if eta >= k_h * k_w:
        raise NotSubBitError(f"not sub-bit: eta={eta} >= {k_h * k_w}")
    n_weights = c_out * c_in * k_h * k_w
    payload = layer_bits(c_out, c_in, k_h, k_w, eta)
    stored = 8 * (
        _LAYER.size + codebook_bytes(eta, k_h, k_w) + index_bytes(c_out, c_in, eta)
    ) + 32 * c_out
    return CompressionRatio(payload / n_weights, stored / n_weights)


def onchip_saving(eta: int, k_w: int, k_h: int) -> float:
    """Fraction of weight storage saved relative to one bit per weight."""
    if eta >= k_w * k_h:
        raise NotSubBitError(f"not sub-bit: eta={eta} >= {k_w * k_h}")
    return (k_w * k_h - eta) / (k_w * k_h)
