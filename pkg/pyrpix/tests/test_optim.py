import collections

import numpy as np
import pytest

from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from pyrpix import tensor as T
from pyrpix.core import ShapeError, TensorError
from pyrpix.optim import Adam, AdamState, adam_step


def _params(**arrays):
    return collections.OrderedDict((name, np.array(value, dtype=np.float64)) for name, value in arrays.items())


@given(values=hnp.arrays(np.float64, st.integers(min_value=1, max_value=8),
                         elements=st.floats(min_value=-10, max_value=10)))
@settings(max_examples=30)
def test_zero_gradient(values):
    params = _params(w=values)
    state = AdamState()

    for _ in range(3):
        adam_step(params, {'w': np.zeros_like(values)}, state, 0.1)

    np.testing.assert_array_equal(params['w'], values)
    assert state.step == 3


def test_missing_gradient_is_zero():
    params = _params(w=[1.0, 2.0])

    adam_step(params, {}, AdamState(), 0.1)

    np.testing.assert_array_equal(params['w'], [1.0, 2.0])


def test_one_step_oracle():
    rng = np.random.default_rng(0)

    start = rng.normal(size=(3, 4))
    grad = rng.normal(size=(3, 4))

    params = _params(w=start)
    lr, beta1, beta2, eps = 0.01, 0.9, 0.999, 1e-8

    adam_step(params, {'w': grad}, AdamState(), lr, beta1=beta1, beta2=beta2, eps=eps)

    m = (1 - beta1) * grad / (1 - beta1)
    v = (1 - beta2) * grad * grad / (1 - beta2)

    np.testing.assert_allclose(params['w'], start - lr * m / (np.sqrt(v) + eps), rtol=0, atol=1e-7)
    np.testing.assert_allclose(params['w'], start - lr * np.sign(grad), rtol=0, atol=1e-7)


def test_two_step_oracle():
    params = _params(w=[0.0])
    state = AdamState()

    adam_step(params, {'w': np.array([1.0])}, state, 0.1)
    adam_step(params, {'w': np.array([-3.0])}, state, 0.1)

    m = 0.9 * 0.1 * 1.0 + 0.1 * -3.0
    v = 0.999 * 0.001 * 1.0 + 0.001 * 9.0

    step1 = 0.1 * 1.0 / (1.0 + 1e-8)
    step2 = 0.1 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)

    assert params['w'][0] == pytest.approx(-step1 - step2, abs=1e-12)


def test_constant_gradient_step_size():
    params = _params(w=[0.0, 0.0])
    state = AdamState()

    lr = 0.001
    previous = params['w'].copy()

    for _ in range(500):
        previous = params['w'].copy()
        adam_step(params, {'w': np.array([0.5, -20.0])}, state, lr)

    np.testing.assert_allclose(np.abs(params['w'] - previous), lr, rtol=0.01)


def test_shape_mismatch():
    with pytest.raises(ShapeError, match=r"Gradient of 'w' has shape \(3,\), parameter has \(2,\)") as excinfo:
        adam_step(_params(w=[0.0, 0.0]), {'w': np.zeros(3)}, AdamState(), 0.1)

    assert excinfo.value.axis == 'w'


def test_adam_reads_gradients_and_decays():
    x = T.parameter(np.array([1.0, -1.0]), name='x')

    optimizer = Adam({'x': x}, lr=0.1, lr_decay=0.5)

    with T.Tape():
        T.backward(T.sum_all(T.mul(x, x)))

    assert optimizer.step() == 0.1
    assert optimizer.lr == 0.05

    np.testing.assert_allclose(x.data, [0.9, -0.9], atol=1e-6)

    optimizer.zero_grad()

    assert x.grad is None
    assert optimizer.step() == 0.05
    assert optimizer.lr == 0.025


def test_adam_zero_lr():
    x = T.parameter(np.array([1.0, 2.0]))

    optimizer = Adam({'x': x}, lr=0.0)

    with T.Tape():
        T.backward(T.sum_all(T.mul(x, x)))

    optimizer.step()

    np.testing.assert_array_equal(x.data, [1.0, 2.0])


def test_adam_negative_lr():
    with pytest.raises(TensorError, match=r'Learning rate cannot be negative, got -1'):
        Adam({}, lr=-1)


def test_adam_keeps_dtype():
    x = T.parameter(np.array([1.0], dtype=np.float32))

    optimizer = Adam({'x': x}, lr=0.1)

    with T.Tape():
        T.backward(T.sum_all(x))

    optimizer.step()

    assert x.dtype == np.float32
