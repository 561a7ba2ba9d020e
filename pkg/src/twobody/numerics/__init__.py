"""Dense float64 arrays, seeded random streams and a reverse-mode tape.

Arrays are plain ``numpy.ndarray`` values in float64.
"""

import numpy as np

from twobody.errors import DimensionError
from twobody.numerics import autodiff as ops
from twobody.numerics.autodiff import ACTIVATIONS, Node, Tape, activation, value
from twobody.numerics.gradcheck import analytic_gradients, finite_difference_check
from twobody.numerics.rng import Rng, uniform


def matmul_batched(a, b) -> np.ndarray:
    """``[B,M,K] @ [B,K,N] -> [B,M,N]``; a batch extent of 1 broadcasts."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 3 or b.ndim != 3:
        raise DimensionError(f"matmul_batched needs 3-d operands, got {a.shape} and {b.shape}")
    if a.shape[2] != b.shape[1] or (a.shape[0] != b.shape[0] and 1 not in (a.shape[0], b.shape[0])):
        raise DimensionError(f"matmul_batched shape mismatch: {a.shape} vs {b.shape}")
    return np.matmul(a, b)


def backward(tape: Tape, loss: Node) -> dict[str, np.ndarray]:
    return tape.backward(loss)


__all__ = [
    "ACTIVATIONS",
    "Node",
    "Rng",
    "Tape",
    "activation",
    "analytic_gradients",
    "backward",
    "finite_difference_check",
    "matmul_batched",
    "ops",
    "uniform",
    "value",
]
