"""Seeded, counter-based random streams."""

from __future__ import annotations

import numpy as np

from twobody.errors import ArgumentError


class Rng:
    """Philox counter-based generator keyed by ``(seed, stream)``.

    Distinct stream indices give statistically independent sequences for the
    same seed, so data shuffling and parameter init never share draws.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ArgumentError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        entropy = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream])
        self._gen = np.random.Generator(np.random.Philox(entropy))

    def spawn(self, stream: int) -> "Rng":
        """Independent generator for a sub-stream of this seed."""
        return Rng(self.seed, self.stream * 1_000_003 + stream + 1)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, std: float, shape) -> np.ndarray:
        return self._gen.normal(0.0, std, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"


def uniform(rng: Rng, lo: float, hi: float, shape) -> np.ndarray:
    """I.i.d. samples from ``U[lo, hi)``."""
    if not lo < hi:
        raise ArgumentError(f"uniform needs lo < hi, got [{lo}, {hi})")
    return rng.generator.uniform(lo, hi, size=shape)
