"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from twobody.errors import ArgumentError, EvaluationError
from twobody.numerics.autodiff import Tape, value
from twobody.numerics.rng import Rng


def _scalar(f, params):
    out = float(np.asarray(value(f(params))).reshape(()))
    if not np.isfinite(out):
        raise EvaluationError(f"function value is not finite: {out}")
    return out


def analytic_gradients(f: Callable, params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    tape = Tape()
    loss = f(tape.parameters(params))
    return tape.backward(loss)


def finite_difference_check(
    f: Callable,
    params: dict[str, np.ndarray],
    eps: float = 1e-5,
    max_coords: int = 256,
    seed: int = 0,
) -> float:
    """Max of ``|analytic - numeric| / max(1, |numeric|)`` over coordinates.

    ``f`` maps a dict of parameters (arrays or tape nodes) to a scalar. When
    there are more than ``max_coords`` coordinates, a seeded random subsample
    of ``max_coords`` of them is checked (``max_coords`` is raised to 200 if
    smaller).
    """
    if eps <= 0:
        raise ArgumentError("eps must be positive")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    grads = analytic_gradients(f, params)
    coords = [(name, i) for name, p in params.items() for i in range(p.size)]
    max_coords = max(max_coords, 200)
    if len(coords) > max_coords:
        pick = Rng(seed, 7).generator.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    worst = 0.0
    for name, i in coords:
        flat = params[name].reshape(-1)
        saved = flat[i]
        flat[i] = saved + eps
        up = _scalar(f, params)
        flat[i] = saved - eps
        down = _scalar(f, params)
        flat[i] = saved
        numeric = (up - down) / (2.0 * eps)
        analytic = grads[name].reshape(-1)[i]
        worst = max(worst, abs(analytic - numeric) / max(1.0, abs(numeric)))
    return worst
