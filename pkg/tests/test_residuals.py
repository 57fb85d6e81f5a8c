import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from residci.residuals import indicator_residuals, ls_residuals


def random_probas(rng, n, L):
    p = rng.random((n, L)) + 0.05
    return p / p.sum(axis=1, keepdims=True)


def test_ls_hand_values():
    P = np.array([[0.2, 0.3, 0.5], [0.1, 0.6, 0.3], [0.5, 0.25, 0.25]])
    y = np.array([0, 1, 2])
    # P(Y<y) - P(Y>y) row by row
    expected = [0 - 0.8, 0.1 - 0.3, 0.75 - 0]
    np.testing.assert_allclose(ls_residuals(P, y).values, expected, atol=1e-15)


def test_ls_binary_is_observed_minus_expected():
    rng = np.random.default_rng(0)
    p1 = rng.random(50)
    P = np.column_stack([1 - p1, p1])
    y = rng.integers(0, 2, 50)
    np.testing.assert_allclose(ls_residuals(P, y).values, y - p1, atol=1e-14)


def test_ls_brute_force():
    rng = np.random.default_rng(1)
    P = random_probas(rng, 30, 5)
    y = rng.integers(0, 5, 30)
    brute = [sum(P[i, :y[i]]) - sum(P[i, y[i] + 1:]) for i in range(30)]
    np.testing.assert_allclose(ls_residuals(P, y).values, brute, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 7), st.integers(1, 40), st.integers(0, 2**31))
def test_ls_bounded_and_mean_zero_in_expectation(L, n, seed):
    rng = np.random.default_rng(seed)
    P = random_probas(rng, n, L)
    y = rng.integers(0, L, n)
    r = ls_residuals(P, y).values
    assert np.all(np.abs(r) <= 1 + 1e-12)
    # E[r | P] = sum_y p_y (P(<y) - P(>y)) = 0
    cdf = np.cumsum(P, axis=1)
    expected = np.array([[(cdf[i, j] - P[i, j]) - (1 - cdf[i, j]) for j in range(L)] for i in range(n)])
    np.testing.assert_allclose((expected * P).sum(axis=1), 0, atol=1e-12)


def test_ls_validation():
    with pytest.raises(ValueError):
        ls_residuals(np.ones((2, 1)), np.array([0, 0]))
    with pytest.raises(ValueError):
        ls_residuals(np.full((2, 2), 0.5), np.array([0, 2]))


def test_indicator_hand_values():
    P = np.array([[0.2, 0.3, 0.5], [0.1, 0.6, 0.3]])
    x = np.array([2, 0])
    block = indicator_residuals(P, x)
    assert block.dropped_column == 2
    np.testing.assert_allclose(block.values, [[-0.2, -0.3], [0.9, -0.6]])
    np.testing.assert_allclose(indicator_residuals(P, x, drop=0).values, [[-0.3, 0.5], [-0.6, -0.3]])
    with pytest.raises(ValueError):
        indicator_residuals(P, x, drop=3)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (12, 4), elements=st.floats(0.01, 1)), st.integers(0, 2**31))
def test_indicator_full_rows_sum_to_zero(raw, seed):
    P = raw / raw.sum(axis=1, keepdims=True)
    x = np.random.default_rng(seed).integers(0, 4, 12)
    kept = indicator_residuals(P, x).values
    # the dropped column is minus the sum of the kept ones
    onehot = np.eye(4)[x]
    np.testing.assert_allclose(-kept.sum(axis=1), onehot[:, 3] - P[:, 3], atol=1e-12)
