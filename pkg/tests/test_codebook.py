import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subbitsnn.codebook import (
    CompactCodebook,
    NotSubBitError,
    cluster_stats,
    cluster_stats_csv,
    codeword_grads,
    decode,
    decode_many,
    encode,
    encode_many,
    sample_codebook,
    update_latents,
)


def test_encode_decode_exhaustive_3x3():
    seen = set()
    for code in range(512):
        k = decode(code, 3, 3)
        assert set(np.unique(k)) <= {-1, 1}
        assert encode(k) == code
        seen.add(k.tobytes())
    assert len(seen) == 512
    np.testing.assert_array_equal(encode_many(decode_many(np.arange(512), 3, 3)), np.arange(512))


def test_bit_order_is_row_major_lsb_first():
    k = -np.ones((3, 3), np.int8)
    k[0, 0] = 1
    assert encode(k) == 1
    k = -np.ones((3, 3), np.int8)
    k[2, 2] = 1
    assert encode(k) == 256
    k = -np.ones((3, 3), np.int8)
    k[0, 2] = 1
    assert encode(k) == 4


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.data())
def test_encode_round_trip_any_shape(kh, kw, data):
    code = data.draw(st.integers(0, (1 << (kh * kw)) - 1))
    assert encode(decode(code, kh, kw)) == code


@pytest.mark.parametrize("eta", [1, 4, 5, 6, 8])
def test_sample_codebook_distinct_and_deterministic(eta):
    a = sample_codebook(3, 3, eta, seed=7)
    b = sample_codebook(3, 3, eta, seed=7)
    assert a.size == 1 << eta
    assert len(set(a.ids().tolist())) == a.size
    assert a == b
    assert np.array_equal(a.latents, a.codewords.astype(float))
    assert a.bits_per_weight == eta / 9


def test_sample_codebook_large_kernel():
    cb = sample_codebook(5, 5, 6, seed=3)
    assert cb.codewords.shape == (64, 5, 5)
    assert len(set(cb.ids().tolist())) == 64


def test_sampling_is_roughly_uniform():
    counts = np.zeros(512)
    for seed in range(400):
        counts[sample_codebook(3, 3, 4, seed).ids().astype(int)] += 1
    # 6400 draws over 512 ids: mean 12.5; chi-square well inside a loose bound
    chi2 = np.sum((counts - 12.5) ** 2 / 12.5)
    assert chi2 < 700


@pytest.mark.parametrize("eta", [9, 10, 0])
def test_rejects_non_sub_bit(eta):
    with pytest.raises((NotSubBitError, ValueError)):
        sample_codebook(3, 3, eta, 0)
    if eta >= 9:
        with pytest.raises(NotSubBitError, match="not sub-bit"):
            sample_codebook(3, 3, eta, 0)


def test_codebook_validation():
    cw = decode_many(np.arange(16), 3, 3)
    CompactCodebook(4, cw)
    with pytest.raises(ValueError):
        CompactCodebook(4, cw[:15])
    dup = cw.copy()
    dup[1] = dup[0]
    with pytest.raises(ValueError):
        CompactCodebook(4, dup)


def test_update_latents_resigns():
    cb = sample_codebook(3, 3, 4, seed=0)
    grads = np.zeros_like(cb.latents)
    grads[3, 1, 1] = 1e3 * cb.latents[3, 1, 1]
    new = update_latents(cb, grads, lr=1e-2)
    assert new.codewords[3, 1, 1] == -cb.codewords[3, 1, 1]
    assert np.array_equal(new.codewords, np.where(new.latents < 0, -1, 1))


def test_update_latents_repairs_collision():
    cw = decode_many(np.arange(16), 3, 3)
    cb = CompactCodebook(4, cw, cw.astype(float) * np.linspace(1, 2, 9).reshape(3, 3))
    grads = np.zeros_like(cb.latents)
    # push codeword 1 onto codeword 0 (they differ only in element 0)
    grads[1, 0, 0] = 10.0
    new = update_latents(cb, grads, lr=1.0)
    assert len(set(new.ids().tolist())) == 16
    # the earlier codeword is untouched
    assert np.array_equal(new.codewords[0], cw[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_update_latents_always_distinct(seed):
    rng = np.random.default_rng(seed)
    cb = sample_codebook(3, 3, 5, seed)
    for _ in range(3):
        cb = update_latents(cb, rng.normal(size=cb.latents.shape) * 5, lr=1.0)
        assert len(set(cb.ids().tolist())) == cb.size
        assert np.array_equal(cb.codewords, np.where(cb.latents < 0, -1, 1))


def test_codeword_grads_sum_over_assignments():
    g = np.arange(4 * 9, dtype=float).reshape(4, 3, 3)
    out = codeword_grads(g, [2, 0, 2, 1], size=4)
    np.testing.assert_array_equal(out[2], g[0] + g[2])
    np.testing.assert_array_equal(out[3], 0)


def test_cluster_stats_and_topk():
    signs = np.ones((2, 3, 3, 3), np.int8)
    signs[0, 0] = -1
    st_ = cluster_stats(signs)
    assert st_.total == 6
    assert st_.histogram == {511: 5, 0: 1}
    assert st_.topk(1) == 5 / 6
    assert st_.topk(64) == 1.0
    text = cluster_stats_csv({"conv1": st_}, ks=(1, 2))
    lines = text.splitlines()
    assert lines[0] == "layer,codeword_id,count"
    assert lines[1] == "conv1,511,5"
    assert "conv1,1,0.833333" in lines


def test_topk_monotone():
    rng = np.random.default_rng(0)
    st_ = cluster_stats(np.where(rng.normal(size=(32, 16, 3, 3)) < 0, -1, 1))
    vals = [st_.topk(k) for k in (1, 2, 4, 8, 16, 32, 64, 1000)]
    assert vals == sorted(vals) and vals[-1] == 1.0
