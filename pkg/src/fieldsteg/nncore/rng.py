"""Deterministic random streams.

Draws come from a Philox-4x64 counter-based generator keyed by
``(seed, stream)``. The same key reproduces the same draw sequence on every
platform and in every run, which is what lets two parties regenerate
identical models and noise from nothing but a shared seed. Independent
streams (training noise, per-chunk padding, per-trial experiments) derive
from the same seed with distinct stream indices instead of sharing one
cursor.
"""

from __future__ import annotations

import numpy as np

_U64 = np.uint64


class Rng:
    """Seeded, replayable random source.

    Identical (seed, stream) pairs produce identical draw sequences, so any
    procedure that only pulls numbers from an Rng is fully reproducible.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= int(stream) < 2**64:
            raise ValueError("stream must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=_U64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, stream: int) -> "Rng":
        """Independent stream under the same seed (e.g. one per trial).

        The child key mixes the parent's stream index, so two levels of
        derivation with indices below 2**32 never collide.
        """
        child = ((self.stream << 32) ^ int(stream)) & (2**64 - 1)
        return Rng(self.seed, child)

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Uniform integers in [low, high), returned as uint64."""
        return self._gen.integers(low, high, size=size, dtype=np.uint64)

    def shuffle(self, x) -> None:
        self._gen.shuffle(x)

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream})"
