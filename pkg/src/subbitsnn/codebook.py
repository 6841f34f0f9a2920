"""Binary codewords, compact codebooks and kernel clustering statistics.

A codeword is a k_h x k_w kernel of +-1 values. Its integer id sets bit ``e``
when element ``e`` of the row-major flattened kernel is +1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .binarize import BinaryConvWeights, check_compressible, sign


class NotSubBitError(ValueError):
    pass


def encode(kernel) -> int:
    """Integer id of a +-1 kernel."""
    flat = np.asarray(kernel).reshape(-1)
    if not np.all(np.abs(flat) == 1):
        raise ValueError("codewords must be +1/-1")
    return int(sum(1 << e for e, v in enumerate(flat) if v > 0))


def encode_many(kernels) -> np.ndarray:
    """Vectorised :func:`encode` over a ``(n, k_h, k_w)`` stack, as uint64."""
    k = np.asarray(kernels)
    flat = (k.reshape(k.shape[0], -1) > 0).astype(np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(flat.shape[1], dtype=np.uint64))
    return (flat * weights).sum(axis=1, dtype=np.uint64)


def decode(code: int, k_h: int, k_w: int) -> np.ndarray:
    """Inverse of :func:`encode`."""
    n = k_h * k_w
    code = int(code)
    if not 0 <= code < (1 << n):
        raise ValueError(f"codeword id {code} out of range for a {k_h}x{k_w} kernel")
    bits = [(code >> e) & 1 for e in range(n)]
    return (np.array(bits, dtype=np.int8) * 2 - 1).reshape(k_h, k_w)


def decode_many(codes, k_h: int, k_w: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    shifts = np.arange(k_h * k_w, dtype=np.uint64)
    bits = (codes[:, None] >> shifts[None, :]) & np.uint64(1)
    return (bits.astype(np.int8) * 2 - 1).reshape(len(codes), k_h, k_w)


@dataclass
class CompactCodebook:
    """A layer's 2**eta codewords plus the real-valued latents they are signed from."""

    eta: int
    codewords: np.ndarray
    latents: np.ndarray = None  # type: ignore[assignment]
    seed: int | None = None

    def __post_init__(self):
        self.codewords = np.asarray(self.codewords, dtype=np.int8)
        if self.codewords.ndim != 3:
            raise ValueError("codewords must be shaped (2**eta, k_h, k_w)")
        if self.latents is None:
            self.latents = self.codewords.astype(np.float64)
        else:
            self.latents = np.asarray(self.latents, dtype=np.float64)
        m, k_h, k_w = self.codewords.shape
        if self.eta < 1 or self.eta >= k_h * k_w:
            raise NotSubBitError(f"not sub-bit: eta={self.eta} must satisfy 1 <= eta < {k_h * k_w}")
        if m != 1 << self.eta:
            raise ValueError(f"expected {1 << self.eta} codewords, got {m}")
        if self.latents.shape != self.codewords.shape:
            raise ValueError("latents must parallel codewords")
        if len(set(self.ids().tolist())) != m:
            raise ValueError("codewords must be pairwise distinct")

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def kernel_shape(self) -> tuple[int, int]:
        return self.codewords.shape[1], self.codewords.shape[2]

    @property
    def bits_per_weight(self) -> float:
        k_h, k_w = self.kernel_shape
        return self.eta / (k_h * k_w)

    def ids(self) -> np.ndarray:
        return encode_many(self.codewords)

    def copy(self) -> CompactCodebook:
        return CompactCodebook(self.eta, self.codewords.copy(), self.latents.copy(), self.seed)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompactCodebook):
            return NotImplemented
        return (
            self.eta == other.eta
            and np.array_equal(self.codewords, other.codewords)
            and np.array_equal(self.latents, other.latents)
        )


def sample_codebook(k_w: int, k_h: int, eta: int, seed: int) -> CompactCodebook:
    """Draw 2**eta distinct codewords uniformly without replacement.

    Uses numpy's PCG64 generator seeded with ``seed``.
    """
    n = k_w * k_h
    if eta >= n:
        raise NotSubBitError(f"not sub-bit: eta={eta} must be < k_w*k_h={n}")
    if eta < 1:
        raise ValueError("eta must be at least 1")
    m = 1 << eta
    rng = np.random.Generator(np.random.PCG64(seed))
    if n <= 24:
        ids = rng.choice(1 << n, size=m, replace=False)
    else:
        # full codebook too large to enumerate; rejection keeps draws uniform
        chosen: dict[int, None] = {}
        while len(chosen) < m:
            code = int(rng.integers(0, 1 << n, dtype=np.uint64))
            chosen.setdefault(code)
        ids = np.array(list(chosen), dtype=np.uint64)
    codewords = decode_many(ids, k_h, k_w)
    return CompactCodebook(eta, codewords, codewords.astype(np.float64), seed)


def _repair_collisions(latents: np.ndarray) -> None:
    """Flip latent signs in place until all signed codewords are distinct."""
    m = latents.shape[0]
    if len(set(encode_many(sign(latents)).tolist())) == m:
        return
    for i in range(1, m):
        earlier = {encode(sign(latents[j])) for j in range(i)}
        if encode(sign(latents[i])) not in earlier:
            continue
        # prefer a flip that also avoids the later codewords
        taken = earlier | {encode(sign(latents[j])) for j in range(i + 1, m)}
        flat = latents[i].reshape(-1)
        while encode(sign(flat)) in taken:
            order = np.argsort(np.abs(flat), kind="stable")
            for e in order:
                trial = sign(flat).copy()
                trial[e] = -trial[e]
                if encode(trial) not in taken:
                    _flip(flat, e)
                    break
            else:
                _flip(flat, order[0])


def _flip(flat: np.ndarray, e: int) -> None:
    v = flat[e]
    if v != 0:
        flat[e] = -v
    else:
        # sign(0) is +1, so a zero latent needs a strictly negative value
        flat[e] = -np.finfo(np.float64).eps


def update_latents(cb: CompactCodebook, grads, lr: float) -> CompactCodebook:
    """One descent step on the latents, then re-sign (and repair duplicates)."""
    if lr <= 0:
        raise ValueError("lr must be positive")
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != cb.latents.shape:
        raise ValueError(f"gradient shape {grads.shape} != latent shape {cb.latents.shape}")
    latents = cb.latents - lr * grads
    _repair_collisions(latents)
    return CompactCodebook(cb.eta, sign(latents), latents, cb.seed)


def codeword_grads(kernel_grads, indices, size: int) -> np.ndarray:
    """Sum per-kernel gradients into the codeword each kernel is assigned to."""
    kernel_grads = np.asarray(kernel_grads, dtype=np.float64)
    out = np.zeros((size,) + kernel_grads.shape[1:])
    np.add.at(out, np.asarray(indices), kernel_grads)
    return out


@dataclass
class ClusterStats:
    histogram: dict[int, int] = field(default_factory=dict)
    total: int = 0

    def topk(self, k: int) -> float:
        if self.total == 0:
            return 0.0
        counts = sorted(self.histogram.values(), reverse=True)
        return sum(counts[:k]) / self.total

    def most_common(self, k: int | None = None) -> list[tuple[int, int]]:
        return sorted(self.histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


def cluster_stats(w_b) -> ClusterStats:
    """Histogram of kernel codeword ids over a binary conv layer."""
    signs = w_b.signs if isinstance(w_b, BinaryConvWeights) else np.asarray(w_b)
    check_compressible(signs.shape)
    c_out, c_in, k_h, k_w = signs.shape
    ids = encode_many(signs.reshape(c_out * c_in, k_h, k_w))
    hist = Counter(int(i) for i in ids)
    return ClusterStats(dict(hist), c_out * c_in)


TOPK_DEFAULT = (1, 2, 4, 8, 16, 32, 64)


def cluster_stats_csv(stats_by_layer: dict[str, ClusterStats], ks=TOPK_DEFAULT) -> str:
    """``layer,codeword_id,count`` rows followed by a ``layer,k,ratio`` top-k block."""
    lines = ["layer,codeword_id,count"]
    for name, st in stats_by_layer.items():
        for code, count in st.most_common():
            lines.append(f"{name},{code},{count}")
    lines.append("")
    lines.append("# topk")
    lines.append("layer,k,ratio")
    for name, st in stats_by_layer.items():
        for k in ks:
            lines.append(f"{name},{k},{st.topk(k):.6f}")
    return "\n".join(lines) + "\n"
