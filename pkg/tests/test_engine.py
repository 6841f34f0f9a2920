import numpy as np
import pytest

from conftest import naive_conv, random_layer
from subbitsnn.binarize import BinaryConvWeights
from subbitsnn.engine import (
    InferenceLayer,
    InferenceNet,
    OpCounters,
    binary_conv,
    binary_conv_int,
    binary_linear,
    conv_flops,
    count_ops,
    reuse_counters,
    subbit_conv,
)
from subbitsnn.neuron import LifConfig
from subbitsnn.tensor import SpikeTensor


def spikes(rng, b, c, h, w, p=0.3):
    return (rng.random((b, c, h, w)) < p).astype(np.uint8)


@pytest.mark.parametrize("k", [3, 5])
def test_binary_conv_matches_naive(rng, k):
    s = spikes(rng, 2, 3, 5, 6)
    signs = np.where(rng.random((4, 3, k, k)) < 0.5, -1, 1)
    alpha = rng.uniform(0.1, 1, 4)
    out = binary_conv(s, BinaryConvWeights(signs, alpha))
    np.testing.assert_allclose(out, naive_conv(s, alpha[:, None, None, None] * signs), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(binary_conv_int(s, signs), naive_conv(s, signs.astype(float)))


def test_binary_conv_popcount_identity(rng):
    # +-1 dot {0,1}: 2*popcount(x & w_plus) - popcount(x)
    s = spikes(rng, 1, 1, 1, 1, p=1.0)
    signs = np.ones((1, 1, 3, 3), np.int8)
    signs[0, 0, 1, 1] = -1
    assert binary_conv_int(s, signs)[0, 0, 0, 0] == -1


@pytest.mark.parametrize("k,eta", [(3, 4), (3, 6), (5, 5)])
def test_subbit_equals_reference(rng, k, eta):
    for seed in range(5):
        q = random_layer(rng, 7, 4, k, eta, seed)
        s = spikes(rng, 2, 4, 6, 5)
        out, c = subbit_conv(s, q)
        ref, rc = binary_conv(s, q.reconstruct(), with_counters=True)
        np.testing.assert_array_equal(out, ref)
        assert c.adds == rc.adds
        assert c.multiplies + c.lut_hits == c.adds
        assert c == reuse_counters(q, 2, 6, 5)


def test_reuse_bound_wide_layer(rng):
    q = random_layer(rng, 256, 2, 3, 4, 0)
    s = spikes(rng, 1, 2, 4, 4)
    _, c = subbit_conv(s, q)
    _, rc = binary_conv(s, q.reconstruct(), with_counters=True)
    assert c.multiplies / rc.multiplies <= 16 / 256
    assert c.adds == rc.adds


def test_spike_tensor_input(rng):
    q = random_layer(rng, 3, 2, 3, 4, 0)
    s = spikes(rng, 1, 2, 4, 4)
    a, _ = subbit_conv(s, q)
    b, _ = subbit_conv(SpikeTensor.from_array(s), q)
    np.testing.assert_array_equal(a, b)


def test_input_validation(rng):
    q = random_layer(rng, 3, 2, 3, 4, 0)
    with pytest.raises(ValueError):
        subbit_conv(spikes(rng, 1, 3, 4, 4), q)
    with pytest.raises(ValueError):
        subbit_conv(np.full((1, 2, 4, 4), 2), q)


def test_counters_add():
    a = OpCounters(1, 2, 3)
    a += OpCounters(1, 1, 1)
    assert a + OpCounters() == OpCounters(2, 3, 4)


def test_binary_linear(rng):
    s = spikes(rng, 3, 2, 2, 2)
    signs = np.where(rng.random((5, 8)) < 0.5, -1, 1)
    alpha = rng.uniform(size=5)
    np.testing.assert_allclose(binary_linear(s, signs, alpha), (s.reshape(3, -1) @ signs.T) * alpha)


def test_flops_and_sops():
    assert conv_flops(128, 64, 3, 3, 32, 32) == 2 * 9 * 64 * 128 * 1024
    ops = count_ops([(16, 3, 3, 3), (32, 16, 3, 3)], (3, 8, 8), T=4, fr=0.25)
    assert ops.flops == [conv_flops(16, 3, 3, 3, 8, 8), conv_flops(32, 16, 3, 3, 8, 8)]
    assert ops.sops == [f * 1.0 for f in ops.flops]
    with pytest.raises(ValueError):
        count_ops([(16, 3, 3, 3)], (4, 8, 8), 4, 0.1)
    with pytest.raises(ValueError):
        count_ops([(16, 3, 3, 3)], (3, 8, 8), 4, 1.5)


def test_inference_net_paths_agree(rng):
    layers = [InferenceLayer(random_layer(rng, 6, 2, 3, 4, 0), rng.uniform(0.5, 2, 6), rng.normal(size=6)),
              InferenceLayer(random_layer(rng, 4, 6, 3, 5, 1))]
    net = InferenceNet(layers, LifConfig(), rng.normal(size=(3, 4 * 5 * 5)), np.zeros(3))
    x = (rng.random((4, 2, 2, 5, 5)) < 0.4).astype(np.uint8)
    a, ca, ra = net.run(x)
    b, cb, rb = net.run(x, reference=True)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ra, rb)
    assert ca.adds == cb.adds and ca.multiplies <= cb.multiplies
    with pytest.raises(ValueError):
        net.run(x[0])
