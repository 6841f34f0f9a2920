"""Shared fixtures and independent oracles.

The oracles here are written as plain loops on purpose: they must not share
code with the package so that agreement means something.
"""

import math

import numpy as np
import pytest


ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results):
        title, ok, detail = results[cid]
        terminalreporter.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    passed = sum(ok for _, ok, _ in results.values())
    terminalreporter.write_line(f"{passed}/{len(results)} criteria passed")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def naive_conv(spikes, weights):
    """Direct same-padded cross-correlation, float weights, nested loops."""
    b, c_in, h, w = spikes.shape
    c_out, _, k, _ = weights.shape
    p = k // 2
    out = np.zeros((b, c_out, h, w))
    for n in range(b):
        for o in range(c_out):
            for y in range(h):
                for x in range(w):
                    acc = 0.0
                    for c in range(c_in):
                        for i in range(k):
                            for j in range(k):
                                yy, xx = y + i - p, x + j - p
                                if 0 <= yy < h and 0 <= xx < w:
                                    acc += spikes[n, c, yy, xx] * weights[o, c, i, j]
                    out[n, o, y, x] = acc
    return out


def naive_nearest(kernel, codewords):
    """Linear scan; strict ``<`` keeps the lowest index on ties."""
    flat = [float(v) for v in np.asarray(kernel).reshape(-1)]
    best, best_d = -1, math.inf
    for m, cw in enumerate(codewords):
        d = 0.0
        for a, c in zip(flat, np.asarray(cw).reshape(-1)):
            diff = float(c) - a
            d += diff * diff
        if d < best_d:
            best, best_d = m, d
    return best, best_d


def naive_quartile(values, q):
    s = sorted(float(v) for v in values)
    pos = q * (len(s) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def naive_osquant_adjust(kernel, gamma):
    """Fence test then neighbour-mean rescale, written element by element."""
    k = np.asarray(kernel, dtype=np.float64)
    kh, kw = k.shape
    q1 = naive_quartile(k.reshape(-1), 0.25)
    q3 = naive_quartile(k.reshape(-1), 0.75)
    iqr = q3 - q1
    lo, hi = q1 - gamma * iqr, q3 + gamma * iqr
    out = k.copy()
    found = []
    for i in range(kh):
        for j in range(kw):
            if k[i, j] < lo or k[i, j] > hi:
                nb = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                nb = [(a, b) for a, b in nb if 0 <= a < kh and 0 <= b < kw]
                om = 0.0
                for a, b in nb:
                    om += abs(k[i, j] - k[a, b])
                om /= len(nb)
                found.append(((i, j), om))
                if om > 0:
                    out[i, j] = k[i, j] / om
    return out, found


def random_layer(rng, c_out, c_in, k=3, eta=4, seed=0):
    from subbitsnn.codebook import sample_codebook
    from subbitsnn.pack import QuantizedLayer

    cb = sample_codebook(k, k, eta, seed)
    idx = rng.integers(0, 1 << eta, size=(c_out, c_in))
    alpha = rng.uniform(0.1, 1.0, size=c_out).astype(np.float32).astype(np.float64)
    return QuantizedLayer(cb, idx, alpha)
