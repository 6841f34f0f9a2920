import numpy as np
import pytest

from subbitsnn.binarize import BinaryConvWeights, channel_scale, is_compressible, sign, sign_binarize


def test_sign_maps_zero_to_plus_one():
    assert sign([-2.0, -0.0, 0.0, 3.0]).tolist() == [-1, 1, 1, 1]


def test_alpha_is_channel_mean_abs():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(4, 3, 3, 3))
    bw = sign_binarize(w)
    for o in range(4):
        assert bw.alpha[o] == pytest.approx(np.mean(np.abs(w[o])), rel=1e-15)
    np.testing.assert_array_equal(bw.dense(), bw.alpha[:, None, None, None] * np.where(w < 0, -1, 1))


def test_alpha_minimises_l2_error():
    rng = np.random.default_rng(2)
    w = rng.normal(size=(1, 2, 3, 3))
    s = sign(w)
    a = channel_scale(w)[0]
    err = lambda x: np.sum((w - x * s) ** 2)
    assert err(a) <= min(err(a * 0.99), err(a * 1.01))


def test_validation():
    with pytest.raises(ValueError):
        BinaryConvWeights(np.zeros((1, 1, 3, 3)), np.ones(1))
    with pytest.raises(ValueError):
        BinaryConvWeights(np.ones((2, 1, 3, 3)), np.ones(1))
    with pytest.raises(ValueError):
        sign_binarize(np.ones((3, 3)))


def test_compressible_shapes():
    assert is_compressible((8, 4, 3, 3))
    assert not is_compressible((8, 4, 1, 1))
    assert not is_compressible((8, 4, 3, 5))
    assert not is_compressible((8, 4))
