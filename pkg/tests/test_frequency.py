import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twobody.errors import ArgumentError, DimensionError
from twobody.frequency import dct_apply, dct_basis, idct_apply


def cosine_entry(i1, t1, T):
    """Basis entry written with 1-based frequency i1 and frame t1."""
    delta = 1.0 if i1 == 1 else 0.0
    return math.sqrt(2.0 / T) / math.sqrt(1.0 + delta) * math.cos(math.pi * (2 * t1 - 1) * (i1 - 1) / (2 * T))


def loop_dct(x):
    T = len(x)
    return np.array([sum(cosine_entry(i, t, T) * x[t - 1] for t in range(1, T + 1)) for i in range(1, T + 1)])


def test_basis_small_cases():
    assert np.array_equal(dct_basis(1).matrix, [[1.0]])
    assert np.allclose(dct_basis(4).matrix[0], 0.5, atol=1e-15)
    direct = np.array([[cosine_entry(i, t, 4) for t in range(1, 5)] for i in range(1, 5)])
    assert np.abs(dct_basis(4).matrix - direct).max() < 1e-15


def test_basis_is_cached_and_frozen():
    assert dct_basis(7).matrix is dct_basis(7).matrix
    with pytest.raises(ValueError):
        dct_basis(7).matrix[0, 0] = 2.0


def test_invalid_lengths():
    with pytest.raises(ArgumentError):
        dct_basis(0)
    with pytest.raises(ArgumentError):
        dct_apply(np.ones(4), dct_basis(4), retain=5)
    with pytest.raises(DimensionError):
        dct_apply(np.ones(3), dct_basis(4))
    with pytest.raises(ArgumentError):
        idct_apply(np.ones(5), 4)


def test_constant_signal():
    c = dct_apply(np.ones(4), dct_basis(4))
    assert np.allclose(c, [2.0, 0.0, 0.0, 0.0], atol=1e-15)
    assert np.allclose(idct_apply(np.array([2.0, 0.0, 0.0, 0.0]), 4), 1.0, atol=1e-15)
    assert np.allclose(idct_apply(np.array([3.0]), 4), 3.0 / 2.0, atol=1e-15)


def test_ramp_against_double_loop():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.abs(dct_apply(x, dct_basis(4)) - loop_dct(x)).max() < 1e-13


@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_roundtrip_parseval(T, seed):
    x = np.random.default_rng(seed).normal(size=(T, 3, 2))
    c = dct_apply(x, dct_basis(T))
    assert np.abs(idct_apply(c, T) - x).max() < 1e-10
    assert abs(np.linalg.norm(c) - np.linalg.norm(x)) < 1e-10


@given(st.integers(2, 30), st.data())
def test_truncation_is_least_squares_projection(T, data):
    K = data.draw(st.integers(1, T - 1))
    x = np.random.default_rng(data.draw(st.integers(0, 2**31 - 1))).normal(size=T)
    rows = np.array([[cosine_entry(i, t, T) for t in range(1, T + 1)] for i in range(1, K + 1)])
    coef, *_ = np.linalg.lstsq(rows.T, x, rcond=None)
    assert np.abs(idct_apply(dct_apply(x, dct_basis(T), K), T) - rows.T @ coef).max() < 1e-10


def test_orthonormal_up_to_128():
    for T in range(1, 129):
        B = dct_basis(T).matrix
        assert np.abs(B @ B.T - np.eye(T)).max() < 1e-10
