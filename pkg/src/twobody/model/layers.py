"""Building blocks of the encoder and decoders.

All functions take arrays or tape nodes shaped ``[..., T, V, C]`` (time,
graph node, channel, with optional leading batch axes) and return the same
kind of object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from twobody.errors import ArgumentError, DimensionError
from twobody.numerics import ops


@dataclass
class LayerParams:
    A_s: object  # [V, V] or [T, V, V]
    A_t: object  # [T, T] or [V, T, T]
    W: object  # [C_in, C_out]
    activation: str = "relu"


@dataclass
class AttentionParams:
    W1: object  # [C, C]
    W2: object  # [C, C]
    W3: object  # [C, 1]
    W4: object  # [C, 1]


@dataclass
class HierarchyParams:
    down: object  # [V, P]
    up: object  # [P, V]


def _shape(x):
    return ops.value(x).shape


def _swap(x, i, j):
    axes = list(range(len(_shape(x))))
    axes[i], axes[j] = axes[j], axes[i]
    return ops.transpose(x, axes)


def mix_time(matrix, x):
    """``out[..., t', v, c] = sum_t matrix[t', t] x[..., t, v, c]``."""
    shape = _shape(x)
    flat = ops.reshape(x, shape[:-3] + (shape[-3], shape[-2] * shape[-1]))
    out = ops.matmul(matrix, flat)
    return ops.reshape(out, shape[:-3] + (_shape(matrix)[0],) + shape[-2:])


def layer_forward(x, p: LayerParams, slope: float = 0.2):
    """Separable graph convolution ``act(A_s (A_t x) W)``; time is mixed first."""
    T, V, C = _shape(x)[-3:]
    a_s, a_t, w = _shape(p.A_s), _shape(p.A_t), _shape(p.W)
    if a_t not in ((T, T), (V, T, T)):
        raise DimensionError(f"A_t shape {a_t} does not fit T={T}, V={V}")
    if a_s not in ((V, V), (T, V, V)):
        raise DimensionError(f"A_s shape {a_s} does not fit T={T}, V={V}")
    if len(w) != 2 or w[0] != C:
        raise DimensionError(f"W shape {w} does not fit C_in={C}")
    if len(a_t) == 2:
        y = mix_time(p.A_t, x)
    else:
        # per-node temporal matrices: bring nodes in front of time
        nd = len(_shape(x))
        y = _swap(ops.matmul(p.A_t, _swap(x, nd - 3, nd - 2)), nd - 3, nd - 2)
    y = ops.matmul(p.A_s, y)
    y = ops.matmul(y, p.W)
    return ops.activation(y, p.activation, slope)


def nonseparable_layer_forward(x, A_st, W, activation: str = "relu", slope: float = 0.2):
    """``act(A_st x W)`` with ``A_st`` over flattened ``(t, v)`` nodes, t-major."""
    shape = _shape(x)
    T, V, C = shape[-3:]
    if _shape(A_st) != (T * V, T * V):
        raise DimensionError(f"A_st shape {_shape(A_st)} does not fit T*V={T * V}")
    if _shape(W)[0] != C:
        raise DimensionError(f"W shape {_shape(W)} does not fit C_in={C}")
    flat = ops.reshape(x, shape[:-3] + (T * V, C))
    y = ops.matmul(ops.matmul(A_st, flat), W)
    y = ops.reshape(y, shape[:-3] + (T, V, _shape(W)[1]))
    return ops.activation(y, activation, slope)


def attention_weights(b1, b2, p: AttentionParams, slope: float = 0.2):
    """Row-stochastic weights ``(eta, eta_t)`` of shapes ``[..., T, n, m]`` and
    ``[..., T, m, n]``, plus the embeddings ``(h1, h2)``."""
    if _shape(b1)[:-2] != _shape(b2)[:-2] or _shape(b1)[-1] != _shape(b2)[-1]:
        raise DimensionError(f"body tensors disagree: {_shape(b1)} vs {_shape(b2)}")
    h1 = ops.matmul(b1, p.W1)
    h2 = ops.matmul(b2, p.W2)
    s1 = ops.matmul(h1, p.W3)  # [..., T, n, 1]
    s2 = ops.matmul(h2, p.W4)  # [..., T, m, 1]
    nd = len(_shape(s2))
    scores = ops.activation(ops.add(s1, _swap(s2, nd - 2, nd - 1)), "leaky_relu", slope)
    eta = ops.softmax(scores)
    eta_t = ops.softmax(_swap(scores, nd - 2, nd - 1))
    return eta, eta_t, h1, h2


def cross_attention(b1, b2, p: AttentionParams, slope: float = 0.2):
    """Each body aggregates the other body's embeddings.

    ``b1_out[t, j] = sum_k eta[t, j, k] h2[t, k]`` and
    ``b2_out[t, k] = sum_j eta_t[t, k, j] h1[t, j]``.
    """
    eta, eta_t, h1, h2 = attention_weights(b1, b2, p, slope)
    return ops.matmul(eta, h2), ops.matmul(eta_t, h1)


def hierarchy_apply(x, matrix):
    """Node-axis linear map ``x'[..., k, :, c] = matrix^T x[..., k, :, c]``."""
    V = _shape(x)[-2]
    if len(_shape(matrix)) != 2 or _shape(matrix)[0] != V:
        raise DimensionError(f"hierarchy matrix {_shape(matrix)} does not fit {V} nodes")
    return ops.matmul(ops.transpose(matrix), x)


def fc_decode(h, D, bias):
    """``out[n, v, c] = sum_k D[k, n] h[k, v, c] + bias[n]``."""
    K = _shape(h)[-3]
    if len(_shape(D)) != 2 or _shape(D)[0] != K or _shape(bias) != (_shape(D)[1],):
        raise DimensionError(f"decoder weight {_shape(D)} / bias {_shape(bias)} do not fit K={K}")
    out = mix_time(ops.transpose(D), h)
    return ops.add(out, ops.reshape(bias, (_shape(D)[1], 1, 1)))


def shift_matrix(T: int, offset: int) -> np.ndarray:
    """``(S x)[t] = x[t + offset]`` with zeros outside ``[0, T)``."""
    return np.eye(T, k=offset)


def tap_selector(kernel: int, C: int, d: int) -> np.ndarray:
    """Constant ``[C, kernel*C]`` matrix picking tap ``d`` of a flattened
    ``[kernel, C, C']`` weight."""
    sel = np.zeros((C, kernel * C))
    sel[:, d * C:(d + 1) * C] = np.eye(C)
    return sel


def conv_time(x, weight, activation: str | None = None, slope: float = 0.2):
    """Same-padded 1-D cross-correlation along time.

    ``weight`` is ``[kernel, C_in, C_out]``;
    ``out[t] = sum_d x[t + d - r] @ weight[d]`` with ``r = kernel // 2``.
    """
    kernel, c_in, c_out = _shape(weight)
    if kernel % 2 == 0:
        raise ArgumentError(f"kernel must be odd, got {kernel}")
    T, _, C = _shape(x)[-3:]
    if C != c_in:
        raise DimensionError(f"conv weight {_shape(weight)} does not fit C_in={C}")
    flat = ops.reshape(weight, (kernel * c_in, c_out))
    r = kernel // 2
    out = None
    for d in range(kernel):
        tap = ops.matmul(tap_selector(kernel, c_in, d), flat)
        term = ops.matmul(mix_time(shift_matrix(T, d - r), x), tap)
        out = term if out is None else ops.add(out, term)
    if activation is not None:
        out = ops.activation(out, activation, slope)
    return out


def tcn_decode(h, convs, D, bias, activation: str = "relu", slope: float = 0.2):
    """Stack of time convolutions (activation between them, not after the
    last) followed by a learned linear resampling of time ``K -> N``."""
    if not convs:
        raise ArgumentError("tcn decoder needs at least one conv layer")
    y = h
    for i, w in enumerate(convs):
        y = conv_time(y, w, activation if i < len(convs) - 1 else None, slope)
    return fc_decode(y, D, bias)
