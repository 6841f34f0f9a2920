import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subbitsnn.tensor import SpikeTensor, Tensor4, as_spike_array, firing_rate

shapes4 = st.tuples(*[st.integers(1, 5)] * 4)


def test_tensor4_get_set_row_major():
    t = Tensor4.zeros((2, 3, 4, 5))
    t.set(1, 2, 3, 4, 7.5)
    assert t.get(1, 2, 3, 4) == 7.5
    assert t.flat()[-1] == 7.5
    assert np.asarray(t).dtype == np.float64


def test_tensor4_rejects_wrong_rank():
    with pytest.raises(ValueError):
        Tensor4(np.zeros((2, 3)))


@settings(max_examples=50, deadline=None)
@given(shapes4.flatmap(lambda s: arrays(np.uint8, s, elements=st.integers(0, 1))))
def test_spike_tensor_round_trip(arr):
    st_ = SpikeTensor.from_array(arr)
    assert np.array_equal(st_.to_array(), arr)
    assert st_.count() == int(arr.sum())
    assert st_.bits.size == (arr.size + 7) // 8


def test_spike_tensor_lsb_first_layout():
    arr = np.zeros((1, 1, 1, 9), np.uint8)
    arr[0, 0, 0, 0] = 1
    arr[0, 0, 0, 8] = 1
    assert SpikeTensor.from_array(arr).bits.tolist() == [1, 1]


def test_spike_tensor_rejects_non_binary():
    with pytest.raises(ValueError):
        SpikeTensor.from_array(np.full((1, 1, 1, 2), 2))
    with pytest.raises(ValueError):
        SpikeTensor((1, 1, 1, 9), np.zeros(1, np.uint8))


def test_as_spike_array_validates():
    assert as_spike_array(np.array([True, False])).tolist() == [1, 0]
    with pytest.raises(ValueError):
        as_spike_array(np.array([0.5]))
    with pytest.raises(ValueError):
        as_spike_array(np.array([3]))


def test_firing_rate():
    a = np.zeros((1, 1, 2, 2), np.uint8)
    b = np.ones((1, 1, 2, 2), np.uint8)
    assert firing_rate([a, SpikeTensor.from_array(b)]) == 0.5
    with pytest.raises(ValueError, match="no timesteps"):
        firing_rate([])
    with pytest.raises(ValueError):
        firing_rate([a, np.zeros((1, 1, 3, 3), np.uint8)])
