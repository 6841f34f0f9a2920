"""Toy-scale training of sub-bit spiking conv nets.

One iteration: assign every kernel to a codeword (OS-Quant or the plain
nearest-codeword baseline), run the conv stack over all timesteps with batch
norm and LIF neurons, read out time-averaged spikes with a real-valued linear
layer, add the membrane-potential distillation term when a teacher is given,
then backpropagate through time. Gradients reach dense weights through the
straight-through estimator (times 1/omega at rescaled outliers) and reach each
codeword's latent as the sum over the kernels assigned to it.

Everything runs in float64 numpy on one thread so runs are reproducible to the
byte for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import pack as packmod
from .binarize import channel_scale
from .codebook import CompactCodebook, codeword_grads, sample_codebook, update_latents
from .distill import mpfd_grad, mpfd_loss
from .engine import InferenceLayer, InferenceNet
from .neuron import LifConfig, run_lif, surrogate_grad
from .osquant import DEFAULT_GAMMA, LayerQuantization, quantize_layer, scaled_ste_backward
from .sidecar import sidecar_path  # noqa: F401  (re-exported)

BN_EPS = 1e-5
METRICS_HEADER = "epoch,loss,ce,mpfd,acc,outlier_frac"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ConvSpec:
    c_in: int
    c_out: int
    k: int = 3
    eta: int = 4


@dataclass
class ToyNetSpec:
    input_shape: tuple[int, int, int]
    convs: list[ConvSpec]
    n_classes: int
    T: int = 4
    lif: LifConfig = field(default_factory=LifConfig)

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        self.convs = [c if isinstance(c, ConvSpec) else ConvSpec(**c) for c in self.convs]
        if isinstance(self.lif, dict):
            self.lif = LifConfig(**self.lif)
        if not self.convs:
            raise ValueError("need at least one sub-bit conv layer")
        c = self.input_shape[0]
        for spec in self.convs:
            if spec.c_in != c:
                raise ValueError(f"conv expects {spec.c_in} input channels, previous layer gives {c}")
            if spec.k < 2 or spec.k % 2 == 0:
                raise ValueError("conv kernels must be odd and larger than 1x1")
            if not 1 <= spec.eta < spec.k * spec.k:
                raise ValueError(f"not sub-bit: eta={spec.eta} for a {spec.k}x{spec.k} kernel")
            c = spec.c_out
        if self.T < 1:
            raise ValueError("T must be at least 1")

    @property
    def fc_in(self) -> int:
        _, h, w = self.input_shape
        return self.convs[-1].c_out * h * w

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "convs": [asdict(c) for c in self.convs],
            "n_classes": self.n_classes,
            "T": self.T,
            "lif": asdict(self.lif),
        }


@dataclass
class TrainConfig:
    """``gamma=None`` selects the baseline quantizer; ``math.inf`` disables outlier detection."""

    gamma: float | None = DEFAULT_GAMMA
    lam: float = 1.0
    lr: float = 5e-4
    epochs: int = 200
    seed: int = 0
    batch_size: int = 50
    teacher: str | None = None
    pairing: list[tuple[int, int]] | None = None

    def __post_init__(self):
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("lr, epochs and batch_size must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be non-negative")


# ---------------------------------------------------------------- conv helpers


def im2col(x: np.ndarray, k: int) -> np.ndarray:
    """``(n, c, h, w)`` -> ``(n, h, w, c*k*k)`` same-padded receptive fields."""
    n, c, h, w = x.shape
    p = k // 2
    padded = np.zeros((n, c, h + 2 * p, w + 2 * p))
    padded[:, :, p : p + h, p : p + w] = x
    cols = np.empty((n, h, w, c, k * k))
    for r in range(k):
        for q in range(k):
            cols[..., r * k + q] = padded[:, :, r : r + h, q : q + w].transpose(0, 2, 3, 1)
    return cols.reshape(n, h, w, c * k * k)


def col2im(dcols: np.ndarray, c: int, k: int) -> np.ndarray:
    n, h, w, _ = dcols.shape
    p = k // 2
    d = dcols.reshape(n, h, w, c, k * k)
    dpad = np.zeros((n, c, h + 2 * p, w + 2 * p))
    for r in range(k):
        for q in range(k):
            dpad[:, :, r : r + h, q : q + w] += d[..., r * k + q].transpose(0, 3, 1, 2)
    return dpad[:, :, p : p + h, p : p + w]


def conv_forward(cols: np.ndarray, weight: np.ndarray) -> np.ndarray:
    out = cols @ weight.reshape(weight.shape[0], -1).T  # (n, h, w, c_out)
    return out.transpose(0, 3, 1, 2)


# ---------------------------------------------------------------- the network


class ToyNet:
    """Sub-bit (or full-precision, for teachers) spiking conv net with a linear readout."""

    def __init__(self, spec: ToyNetSpec, seed: int = 0, binary: bool = True):
        self.spec = spec
        self.binary = binary
        rng = np.random.Generator(np.random.PCG64(seed))
        self.conv_w = []
        self.codebooks: list[CompactCodebook] = []
        self.bn_gamma = []
        self.bn_beta = []
        for li, c in enumerate(spec.convs):
            std = math.sqrt(2.0 / (c.c_in * c.k * c.k))
            self.conv_w.append(rng.normal(0.0, std, size=(c.c_out, c.c_in, c.k, c.k)))
            if binary:
                self.codebooks.append(sample_codebook(c.k, c.k, c.eta, seed * 1009 + li))
            self.bn_gamma.append(np.ones(c.c_out))
            self.bn_beta.append(np.full(c.c_out, 0.5))
        self.fc_w = rng.normal(0.0, math.sqrt(1.0 / spec.fc_in), size=(spec.n_classes, spec.fc_in))
        self.fc_b = np.zeros(spec.n_classes)

    # -- parameters as a flat list (for the optimizer)
    def params(self) -> list[np.ndarray]:
        return [*self.conv_w, *self.bn_gamma, *self.bn_beta, self.fc_w, self.fc_b]

    def set_params(self, values: list[np.ndarray]) -> None:
        L = len(self.conv_w)
        self.conv_w = list(values[:L])
        self.bn_gamma = list(values[L : 2 * L])
        self.bn_beta = list(values[2 * L : 3 * L])
        self.fc_w, self.fc_b = values[3 * L], values[3 * L + 1]

    def quantize(self, gamma: float | None) -> list[LayerQuantization]:
        return [quantize_layer(w, cb, gamma) for w, cb in zip(self.conv_w, self.codebooks)]

    def alphas(self) -> list[np.ndarray]:
        # float32-rounded so exported models reproduce the training forward
        return [channel_scale(w).astype(np.float32).astype(np.float64) for w in self.conv_w]

    def effective_weights(self, quant: list[LayerQuantization] | None):
        """Weights the conv actually multiplies spikes by, and the alpha applied after."""
        if not self.binary:
            return [w for w in self.conv_w], [None] * len(self.conv_w)
        wbs = [cb.codewords[q.index].astype(np.float64) for cb, q in zip(self.codebooks, quant)]
        return wbs, self.alphas()

    def copy(self) -> ToyNet:
        other = ToyNet.__new__(ToyNet)
        other.spec = self.spec
        other.binary = self.binary
        other.conv_w = [w.copy() for w in self.conv_w]
        other.codebooks = [cb.copy() for cb in self.codebooks]
        other.bn_gamma = [g.copy() for g in self.bn_gamma]
        other.bn_beta = [b.copy() for b in self.bn_beta]
        other.fc_w = self.fc_w.copy()
        other.fc_b = self.fc_b.copy()
        return other


@dataclass
class ForwardCache:
    logits: np.ndarray
    potentials: list[np.ndarray]  # per layer, [T, b, c, h, w] pre-reset
    spikes: list[np.ndarray]  # per layer, [T, b, c, h, w]
    quant: list[LayerQuantization] | None
    weights: list[np.ndarray]
    alphas: list[np.ndarray | None]
    cols: list[np.ndarray]
    bn: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # (x_hat, mean, std) per layer
    rate: np.ndarray
    bn_stats: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


def forward(net: ToyNet, x: np.ndarray, gamma: float | None = DEFAULT_GAMMA, weights_override=None) -> ForwardCache:
    """Run ``x`` of shape ``[T, b, c, h, w]`` through the net with batch-statistic BN.

    ``weights_override`` replaces the quantized weights (used by gradient checks
    that treat the binary weights as continuous).
    """
    spec = net.spec
    T, b = x.shape[:2]
    quant = net.quantize(gamma) if net.binary else None
    weights, alphas = net.effective_weights(quant)
    if weights_override is not None:
        weights = weights_override
    s_in = x.astype(np.float64)
    potentials, spikes, cols_all, bn_all = [], [], [], []
    for li, c in enumerate(spec.convs):
        h, w = s_in.shape[-2:]
        cols = im2col(s_in.reshape(T * b, c.c_in, h, w), c.k)
        z = conv_forward(cols, weights[li])
        a = z if alphas[li] is None else z * alphas[li][None, :, None, None]
        mean = a.mean(axis=(0, 2, 3))
        var = a.var(axis=(0, 2, 3))
        std = np.sqrt(var + BN_EPS)
        x_hat = (a - mean[None, :, None, None]) / std[None, :, None, None]
        current = net.bn_gamma[li][None, :, None, None] * x_hat + net.bn_beta[li][None, :, None, None]
        spk, u_pre = run_lif(current.reshape(T, b, c.c_out, h, w), spec.lif)
        potentials.append(u_pre)
        spikes.append(spk)
        cols_all.append(cols)
        bn_all.append((x_hat, mean, std))
        s_in = spk.astype(np.float64)
    rate = s_in.mean(axis=0).reshape(b, -1)
    logits = rate @ net.fc_w.T + net.fc_b
    return ForwardCache(logits, potentials, spikes, quant, weights, alphas, cols_all, bn_all, rate)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    b = logits.shape[0]
    loss = -float(log_p[np.arange(b), labels].mean())
    grad = np.exp(log_p)
    grad[np.arange(b), labels] -= 1.0
    return loss, grad / b


@dataclass
class Gradients:
    params: list[np.ndarray]
    binary_weights: list[np.ndarray]
    codewords: list[np.ndarray]


def backward(net: ToyNet, cache: ForwardCache, dlogits: np.ndarray, potential_grads: dict[int, np.ndarray] | None = None, surrogate: bool = True) -> Gradients:
    """Backpropagation through time.

    ``potential_grads`` adds direct gradients on the recorded pre-reset
    potentials (the distillation term). With ``surrogate=False`` spike outputs
    pass no gradient, which is the exact derivative wherever no spike flips.
    The reset path is treated as constant.
    """
    spec = net.spec
    L = len(spec.convs)
    potential_grads = potential_grads or {}
    T, b = cache.spikes[0].shape[:2]
    d_fc_w = dlogits.T @ cache.rate
    d_fc_b = dlogits.sum(axis=0)
    d_rate = (dlogits @ net.fc_w).reshape((b,) + cache.spikes[-1].shape[2:])
    d_spk = np.broadcast_to(d_rate / T, cache.spikes[-1].shape).copy()

    d_w = [None] * L
    d_gamma = [None] * L
    d_beta = [None] * L
    d_wb = [None] * L
    d_cw = [None] * L
    for li in range(L - 1, -1, -1):
        c = spec.convs[li]
        u_pre = cache.potentials[li]
        spk = cache.spikes[li]
        direct = potential_grads.get(li)
        sg = surrogate_grad(u_pre, spec.lif) if surrogate else np.zeros_like(u_pre)
        d_cur = np.empty_like(u_pre)
        carry = np.zeros(u_pre.shape[1:])
        for t in range(T - 1, -1, -1):
            du = d_spk[t] * sg[t] + carry * (1 - spk[t])
            if direct is not None:
                du = du + direct[t]
            d_cur[t] = du
            carry = spec.lif.tau * du

        h, w = u_pre.shape[-2:]
        dy = d_cur.reshape(T * b, c.c_out, h, w)
        x_hat, _, std = cache.bn[li]
        d_gamma[li] = (dy * x_hat).sum(axis=(0, 2, 3))
        d_beta[li] = dy.sum(axis=(0, 2, 3))
        dx_hat = dy * net.bn_gamma[li][None, :, None, None]
        m = dy.shape[0] * h * w
        da = (
            m * dx_hat
            - dx_hat.sum(axis=(0, 2, 3))[None, :, None, None]
            - x_hat * (dx_hat * x_hat).sum(axis=(0, 2, 3))[None, :, None, None]
        ) / (m * std[None, :, None, None])
        alpha = cache.alphas[li]
        dz = da if alpha is None else da * alpha[None, :, None, None]
        dz_flat = dz.transpose(0, 2, 3, 1).reshape(-1, c.c_out)
        cols = cache.cols[li]
        dweight = (dz_flat.T @ cols.reshape(dz_flat.shape[0], -1)).reshape(c.c_out, c.c_in, c.k, c.k)
        if net.binary:
            q = cache.quant[li]
            d_wb[li] = dweight
            d_w[li] = scaled_ste_backward(dweight, net.codebooks[li].codewords[q.index], q.omega)
            kernels = dweight.reshape(c.c_out * c.c_in, c.k, c.k)
            d_cw[li] = codeword_grads(kernels, q.index.reshape(-1), net.codebooks[li].size)
        else:
            d_w[li] = dweight
            d_wb[li] = dweight
        if li > 0:
            weight = cache.weights[li]
            dcols = (dz_flat @ weight.reshape(c.c_out, -1)).reshape(T * b, h, w, -1)
            d_spk = col2im(dcols, c.c_in, c.k).reshape(T, b, c.c_in, h, w)
    return Gradients([*d_w, *d_gamma, *d_beta, d_fc_w, d_fc_b], d_wb, d_cw)


# ---------------------------------------------------------------- one iteration


@dataclass
class IterationResult:
    loss: float
    ce: float
    mpfd: float
    correct: int
    cache: ForwardCache
    teacher_potentials: list[np.ndarray] | None


def default_pairing(student: ToyNet, teacher: ToyNet) -> list[tuple[int, int]]:
    n = min(len(student.spec.convs), len(teacher.spec.convs))
    return [(i, i) for i in range(n)]


def forward_iteration(net: ToyNet, x: np.ndarray, labels: np.ndarray, config: TrainConfig, teacher: ToyNet | None = None) -> IterationResult:
    """Forward pass, losses, and (when a teacher is present) its recorded potentials."""
    cache = forward(net, x, config.gamma)
    ce, _ = cross_entropy(cache.logits, labels)
    mpfd = 0.0
    t_pots = None
    if teacher is not None:
        t_cache = forward(teacher, x, config.gamma)
        t_pots = t_cache.potentials
        pairing = config.pairing or default_pairing(net, teacher)
        mpfd = mpfd_loss(t_pots, cache.potentials, pairing, net.spec.T, skip_degenerate=True)
    loss = ce + config.lam * mpfd
    correct = int((cache.logits.argmax(axis=1) == labels).sum())
    return IterationResult(loss, ce, mpfd, correct, cache, t_pots)


def loss_and_grads(net: ToyNet, x, labels, config: TrainConfig, teacher: ToyNet | None = None, surrogate: bool = True):
    it = forward_iteration(net, x, labels, config, teacher)
    _, dlogits = cross_entropy(it.cache.logits, labels)
    pot_grads = None
    if teacher is not None and config.lam > 0:
        pairing = config.pairing or default_pairing(net, teacher)
        raw = mpfd_grad(it.teacher_potentials, it.cache.potentials, pairing, net.spec.T, skip_degenerate=True)
        pot_grads = {k: config.lam * v for k, v in raw.items()}
    grads = backward(net, it.cache, dlogits, pot_grads, surrogate)
    return it, grads


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[int, np.ndarray] = {}
        self.v: dict[int, np.ndarray] = {}
        self.t: dict[int, int] = {}

    def direction(self, key: int, grad: np.ndarray) -> np.ndarray:
        """Bias-corrected Adam direction; the step is ``lr * direction``."""
        if key not in self.m:
            self.m[key] = np.zeros_like(grad)
            self.v[key] = np.zeros_like(grad)
            self.t[key] = 0
        self.t[key] += 1
        self.m[key] = self.beta1 * self.m[key] + (1 - self.beta1) * grad
        self.v[key] = self.beta2 * self.v[key] + (1 - self.beta2) * grad * grad
        m_hat = self.m[key] / (1 - self.beta1 ** self.t[key])
        v_hat = self.v[key] / (1 - self.beta2 ** self.t[key])
        return m_hat / (np.sqrt(v_hat) + self.eps)


def apply_update(net: ToyNet, grads: Gradients, opt: Adam) -> None:
    """Dense weights, BN and readout step together with the codebook latents."""
    params = net.params()
    net.set_params([p - opt.lr * opt.direction(i, g) for i, (p, g) in enumerate(zip(params, grads.params))])
    if net.binary:
        base = len(params)
        net.codebooks = [
            update_latents(cb, opt.direction(base + i, g), opt.lr)
            for i, (cb, g) in enumerate(zip(net.codebooks, grads.codewords))
        ]


# ---------------------------------------------------------------- data


def stripes_dataset(n: int = 200, T: int = 4, size: int = 8, seed: int = 0, noise: float = 0.1):
    """Two rate-coded classes: horizontal vs vertical stripes.

    Returns ``(spikes [n, T, 1, size, size] uint8, labels [n])``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    stripe = (np.arange(size) % 4 < 2).astype(np.float64)
    protos = [np.repeat(stripe[:, None], size, axis=1), np.repeat(stripe[None, :], size, axis=0)]
    labels = np.arange(n) % 2
    intensity = np.empty((n, 1, size, size))
    for i, y in enumerate(labels):
        img = 0.1 + 0.8 * protos[y] + rng.normal(0.0, noise, size=(size, size))
        intensity[i, 0] = np.clip(img, 0.0, 1.0)
    spikes = (rng.random((n, T, 1, size, size)) < intensity[:, None]).astype(np.uint8)
    return spikes, labels


# ---------------------------------------------------------------- training loop


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    ce: float
    mpfd: float
    acc: float
    outlier_frac: float

    def csv(self) -> str:
        return f"{self.epoch},{self.loss!r},{self.ce!r},{self.mpfd!r},{self.acc!r},{self.outlier_frac!r}"


def metrics_csv(log: list[EpochMetrics]) -> str:
    return "\n".join([METRICS_HEADER] + [m.csv() for m in log]) + "\n"


def train_toy(spec: ToyNetSpec, config: TrainConfig, dataset, teacher: ToyNet | None = None, binary: bool = True, progress=None):
    """Train on ``dataset = (spikes [n, T, c, h, w], labels [n])``.

    Returns ``(net, metrics_log)``. Raises :class:`TrainingDiverged` on NaN loss.
    """
    spikes, labels = dataset
    spikes = np.asarray(spikes)
    labels = np.asarray(labels)
    if spikes.shape[1] != spec.T:
        raise ValueError(f"dataset has {spikes.shape[1]} timesteps, net expects {spec.T}")
    if teacher is None and config.teacher:
        teacher = load_checkpoint(config.teacher)
    net = ToyNet(spec, config.seed, binary=binary)
    opt = Adam(config.lr)
    rng = np.random.Generator(np.random.PCG64(config.seed + 7919))
    n = len(labels)
    log = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        tot = {"loss": 0.0, "ce": 0.0, "mpfd": 0.0}
        correct = 0
        batches = 0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            x = np.ascontiguousarray(spikes[sel].transpose(1, 0, 2, 3, 4))
            it, grads = loss_and_grads(net, x, labels[sel], config, teacher)
            if not math.isfinite(it.loss):
                raise TrainingDiverged(f"loss became {it.loss} at epoch {epoch}, batch starting {start} (ce={it.ce}, mpfd={it.mpfd})")
            apply_update(net, grads, opt)
            tot["loss"] += it.loss
            tot["ce"] += it.ce
            tot["mpfd"] += it.mpfd
            correct += it.correct
            batches += 1
        frac = 0.0
        if net.binary:
            gamma = DEFAULT_GAMMA if config.gamma is None else config.gamma
            fr = [q.outlier_fraction for q in net.quantize(gamma)]
            frac = float(np.mean(fr))
        m = EpochMetrics(epoch, tot["loss"] / batches, tot["ce"] / batches, tot["mpfd"] / batches, correct / n, frac)
        log.append(m)
        if progress is not None:
            progress(m)
    return net, log


def evaluate(net: ToyNet, dataset, gamma: float | None = DEFAULT_GAMMA) -> float:
    spikes, labels = dataset
    x = np.ascontiguousarray(np.asarray(spikes).transpose(1, 0, 2, 3, 4))
    cache = forward(net, x, gamma)
    return float((cache.logits.argmax(axis=1) == labels).mean())


# ---------------------------------------------------------------- export


def export_layers(net: ToyNet, gamma: float | None = DEFAULT_GAMMA) -> list[packmod.QuantizedLayer]:
    if not net.binary:
        raise ValueError("only sub-bit nets can be packed")
    quant = net.quantize(gamma)
    return [
        packmod.QuantizedLayer(CompactCodebook(cb.eta, cb.codewords), q.index, alpha)
        for cb, q, alpha in zip(net.codebooks, quant, net.alphas())
    ]


def fold_batchnorm(net: ToyNet, calib_spikes: np.ndarray, gamma: float | None = DEFAULT_GAMMA):
    """Per-layer ``(scale, shift)`` from full-dataset BN statistics, applied to alpha*conv."""
    x = np.ascontiguousarray(np.asarray(calib_spikes).transpose(1, 0, 2, 3, 4))
    cache = forward(net, x, gamma)
    folded = []
    for li, (_, mean, std) in enumerate(cache.bn):
        scale = net.bn_gamma[li] / std
        folded.append((scale, net.bn_beta[li] - scale * mean))
    return folded


def inference_net(net: ToyNet, folded, gamma: float | None = DEFAULT_GAMMA) -> InferenceNet:
    layers = [InferenceLayer(q, s, b) for q, (s, b) in zip(export_layers(net, gamma), folded)]
    return InferenceNet(layers, net.spec.lif, net.fc_w.copy(), net.fc_b.copy())


def save_checkpoint(net: ToyNet, path, folded=None, gamma: float | None = DEFAULT_GAMMA) -> None:
    """Write the dense-weight sidecar: conv weights, BN, codebook latents, readout."""
    path = Path(path)
    arrays = {"fc_w": net.fc_w, "fc_b": net.fc_b}
    for i, w in enumerate(net.conv_w):
        arrays[f"conv_w{i}"] = w
        arrays[f"bn_gamma{i}"] = net.bn_gamma[i]
        arrays[f"bn_beta{i}"] = net.bn_beta[i]
        if net.binary:
            arrays[f"latents{i}"] = net.codebooks[i].latents
            arrays[f"codewords{i}"] = net.codebooks[i].codewords
        if folded is not None:
            arrays[f"bn_scale{i}"] = folded[i][0]
            arrays[f"bn_shift{i}"] = folded[i][1]
    meta = {"spec": net.spec.to_dict(), "binary": net.binary, "gamma": gamma}
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> ToyNet:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        spec = ToyNetSpec(**meta["spec"])
        net = ToyNet.__new__(ToyNet)
        net.spec = spec
        net.binary = meta["binary"]
        L = len(spec.convs)
        net.conv_w = [data[f"conv_w{i}"].copy() for i in range(L)]
        net.bn_gamma = [data[f"bn_gamma{i}"].copy() for i in range(L)]
        net.bn_beta = [data[f"bn_beta{i}"].copy() for i in range(L)]
        net.codebooks = []
        if net.binary:
            for i in range(L):
                cw = data[f"codewords{i}"]
                net.codebooks.append(CompactCodebook(spec.convs[i].eta, cw, data[f"latents{i}"].copy()))
        net.fc_w = data["fc_w"].copy()
        net.fc_b = data["fc_b"].copy()
    return net


def load_folded(path):
    """Folded BN ``[(scale, shift), ...]`` from a sidecar, or None if absent."""
    with np.load(path) as data:
        L = sum(1 for k in data.files if k.startswith("conv_w"))
        if "bn_scale0" not in data.files:
            return None
        return [(data[f"bn_scale{i}"].copy(), data[f"bn_shift{i}"].copy()) for i in range(L)]
