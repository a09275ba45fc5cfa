import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mvamp.errors import ParameterError
from mvamp.metrics import accuracy, comembership_mse, overlap, recovery_score


def test_overlap_and_accuracy():
    x = np.array([1, -1, 1, 1])
    assert overlap(x, x) == 1.0
    assert overlap(-x, x) == 1.0
    assert accuracy(-x, x) == 1.0
    assert accuracy(np.array([1, 1, 1, 1]), x) == 0.75
    with pytest.raises(ParameterError):
        overlap(x[:3], x)
    with pytest.raises(ParameterError):
        accuracy(np.array([]), np.array([]))


def test_accuracy_at_least_half():
    rng = np.random.default_rng(0)
    x = rng.choice([-1, 1], 1001)
    assert accuracy(rng.choice([-1, 1], 1001), x) >= 0.5


def test_comembership_perfect_and_zero():
    x = np.array([1.0, -1.0, 1.0, -1.0, -1.0])
    assert comembership_mse(x, x) == pytest.approx(0.0, abs=1e-15)
    assert comembership_mse(np.zeros(5), x) == pytest.approx(1.0)
    assert comembership_mse(np.outer(x, x), x) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(u=arrays(np.float64, (9,), elements=st.floats(-1, 1)), bits=st.lists(st.booleans(), min_size=9, max_size=9))
def test_factored_matches_dense(u, bits):
    x = np.where(bits, 1.0, -1.0)
    dense = comembership_mse(np.outer(u, u), x)
    assert comembership_mse(u, x) == pytest.approx(dense, abs=1e-12)


def test_comembership_validation():
    with pytest.raises(ParameterError):
        comembership_mse(np.zeros(1), np.ones(1))
    with pytest.raises(ParameterError):
        comembership_mse(np.zeros((3, 2)), np.ones(3))


def test_recovery_score():
    X = np.array([[1, 1], [-1, 1], [1, -1], [-1, -1]])
    s = recovery_score(X, X, yhat=np.array([1, 1, -1, -1]), Y=np.array([1, 1, -1, -1]))
    assert np.allclose(s.overlap, 1) and np.allclose(s.accuracy, 1)
    assert s.global_accuracy == 1.0
    assert np.allclose(s.mse_est, 0.0)
    soft = 0.5 * X
    s2 = recovery_score(X, X, soft=soft)
    assert s2.global_accuracy is None
    assert np.all(s2.mse_est > 0)
