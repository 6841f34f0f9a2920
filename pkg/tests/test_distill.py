import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subbitsnn.distill import DegenerateGramError, gram, mpfd_grad, mpfd_loss


def random_potentials(rng, T, b, shapes):
    return [[rng.normal(size=(b,) + s) for _ in range(T)] for s in shapes]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.integers(1, 4), st.floats(1e-6, 1e6), st.integers(0, 2**31))
def test_gram_symmetric_unit_norm_scale_invariant(b, c, hw, scale, seed):
    u = np.random.default_rng(seed).normal(size=(b, c, hw, hw))
    g = gram(u).g
    assert np.array_equal(g, g.T)
    assert abs(np.linalg.norm(g) - 1.0) < 1e-10
    assert np.max(np.abs(gram(u * scale).g - g)) < 1e-10


def test_gram_shape_and_degenerate():
    u = np.ones((3, 2, 2, 2))
    f = gram(u)
    assert f.g.shape == (3, 3) and f.source_shape == (3, 2, 2, 2)
    np.testing.assert_allclose(f.g, np.full((3, 3), 1 / 3))
    with pytest.raises(DegenerateGramError):
        gram(np.zeros((2, 1, 2, 2)))


def test_loss_zero_for_identical_and_nonnegative(rng):
    t = random_potentials(rng, 3, 4, [(2, 3, 3)])
    assert mpfd_loss(t, t, [(0, 0)], 3) == 0.0
    s = random_potentials(rng, 3, 4, [(5, 2, 2)])
    assert mpfd_loss(t, s, [(0, 0)], 3) > 0


def test_batch_mismatch_raises(rng):
    t = random_potentials(rng, 1, 4, [(2, 3, 3)])
    s = random_potentials(rng, 1, 3, [(2, 3, 3)])
    with pytest.raises(ValueError, match="batch size mismatch"):
        mpfd_loss(t, s, [(0, 0)], 1)


def test_degenerate_skip(rng):
    t = random_potentials(rng, 2, 3, [(2, 2, 2)])
    s = random_potentials(rng, 2, 3, [(2, 2, 2)])
    s[0][1] = np.zeros_like(s[0][1])
    with pytest.raises(DegenerateGramError):
        mpfd_loss(t, s, [(0, 0)], 2)
    full = mpfd_loss(t, s, [(0, 0)], 2, skip_degenerate=True)
    assert full == pytest.approx(mpfd_loss([t[0][:1]], [s[0][:1]], [(0, 0)], 1))
    g = mpfd_grad(t, s, [(0, 0)], 2, skip_degenerate=True)
    assert np.all(g[0][1] == 0)


def central_fd(t, s, pairing, T, h=1e-6):
    grads = {}
    for ls in {p[1] for p in pairing}:
        out = np.zeros((T,) + s[ls][0].shape)
        for ti in range(T):
            x = s[ls][ti]
            it = np.nditer(x, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                old = x[i]
                x[i] = old + h
                up = mpfd_loss(t, s, pairing, T)
                x[i] = old - h
                dn = mpfd_loss(t, s, pairing, T)
                x[i] = old
                out[(ti,) + i] = (up - dn) / (2 * h)
        grads[ls] = out
    return grads


def test_grad_matches_finite_differences_mismatched_channels(rng):
    t = random_potentials(rng, 2, 3, [(4, 2, 2), (6, 1, 1)])
    s = random_potentials(rng, 2, 3, [(2, 3, 3), (3, 2, 2)])
    pairing = [(0, 1), (1, 0), (0, 0)]
    ana = mpfd_grad(t, s, pairing, 2)
    num = central_fd(t, s, pairing, 2)
    for ls in num:
        err = np.linalg.norm(ana[ls] - num[ls]) / np.linalg.norm(num[ls])
        assert err < 1e-6
