"""Orthonormal DCT-II / inverse mapping along the time axis.

Row ``i`` (0-based) of the basis for ``T`` frames is

    sqrt(2/T) * w_i * cos(pi * (2t + 1) * i / (2T)),   t = 0..T-1,

with ``w_0 = 1/sqrt(2)`` and ``w_i = 1`` otherwise. In 1-based notation this
is the usual ``cos(pi (2t-1)(i-1) / 2T)`` form with the ``1/sqrt(1 + delta_i1)``
factor landing on stored row 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from twobody.errors import ArgumentError, DimensionError
from twobody.numerics import ops


@dataclass(frozen=True)
class DCTBasis:
    length: int
    matrix: np.ndarray  # [T, T], rows are frequencies


@lru_cache(maxsize=None)
def _basis_matrix(T: int) -> np.ndarray:
    t = np.arange(T, dtype=np.float64)
    i = np.arange(T, dtype=np.float64)[:, None]
    m = np.sqrt(2.0 / T) * np.cos(np.pi * (2.0 * t + 1.0) * i / (2.0 * T))
    m[0] /= np.sqrt(2.0)
    m.setflags(write=False)
    return m


def dct_basis(T: int) -> DCTBasis:
    if int(T) != T or T < 1:
        raise ArgumentError(f"DCT length must be a positive integer, got {T}")
    return DCTBasis(int(T), _basis_matrix(int(T)))


def _along_time(matrix, x):
    """Apply ``matrix`` to axis 0 of ``x`` (array or tape node)."""
    shape = ops.value(x).shape
    flat = ops.reshape(x, (shape[0], -1))
    out = ops.matmul(matrix, flat)
    return ops.reshape(out, (matrix.shape[0],) + tuple(shape[1:]))


def dct_apply(x, basis: DCTBasis, retain: int | None = None):
    """Frequency coefficients of ``x`` along axis 0, keeping the first ``retain``."""
    T = basis.length
    K = T if retain is None else retain
    if not 1 <= K <= T:
        raise ArgumentError(f"retain must lie in [1, {T}], got {K}")
    if ops.value(x).shape[0] != T:
        raise DimensionError(f"leading extent {ops.value(x).shape[0]} != basis length {T}")
    return _along_time(basis.matrix[:K], x)


def idct_apply(coeffs, T_out: int):
    """Zero-pad ``coeffs`` to ``T_out`` rows and invert the orthonormal DCT."""
    K = ops.value(coeffs).shape[0]
    if K > T_out:
        raise ArgumentError(f"{K} coefficients cannot be inverted onto {T_out} frames")
    # padding with zero rows is the same as using only the first K basis rows
    return _along_time(dct_basis(T_out).matrix[:K].T, coeffs)
