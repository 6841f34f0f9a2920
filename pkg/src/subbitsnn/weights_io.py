"""Dense-weight container read by ``subbitsnn quantize`` and ``analyze``.

Layout (little-endian)::

    b"S2DW"  u16 version  u16 layer_count
    per layer:  u8 ndim  ndim x u32 dims  prod(dims) x float64 (row-major)
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"S2DW"
VERSION = 1


class WeightsFormatError(ValueError):
    pass


def dumps(layers) -> bytes:
    parts = [struct.pack("<4sHH", MAGIC, VERSION, len(layers))]
    for w in layers:
        w = np.ascontiguousarray(w, dtype="<f8")
        parts.append(struct.pack("<B", w.ndim))
        parts.append(struct.pack(f"<{w.ndim}I", *w.shape))
        parts.append(w.tobytes())
    return b"".join(parts)


def loads(data: bytes) -> list[np.ndarray]:
    if len(data) < 8 or data[:4] != MAGIC:
        raise WeightsFormatError("not a dense-weight file (bad magic)")
    _, version, count = struct.unpack_from("<4sHH", data)
    if version != VERSION:
        raise WeightsFormatError(f"unsupported dense-weight version {version}")
    pos = 8
    layers = []
    try:
        for _ in range(count):
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            dims = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            n = int(np.prod(dims)) if dims else 1
            if pos + 8 * n > len(data):
                raise WeightsFormatError("truncated dense-weight file")
            layers.append(np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(dims).astype(np.float64))
            pos += 8 * n
    except struct.error as exc:
        raise WeightsFormatError("truncated dense-weight file") from exc
    if pos != len(data):
        raise WeightsFormatError("trailing bytes in dense-weight file")
    return layers


def save(path, layers) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(layers))


def load(path) -> list[np.ndarray]:
    with open(path, "rb") as fh:
        return loads(fh.read())
