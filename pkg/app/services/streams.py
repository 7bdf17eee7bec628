"""Deterministic, splittable random streams.

Every sampler in the toolkit takes a :class:`RandomStream`; none of them create
their own generator. A stream is identified by a 64-bit seed and a stream
index, so replication ``r`` of an experiment always sees the same draws no
matter which worker runs it.
"""
from __future__ import annotations

import numpy as np

_SEED_LIMIT = 2**64


def validate_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < _SEED_LIMIT:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


class RandomStream:
    """A numpy ``Generator`` bound to ``(seed, index)``."""

    __slots__ = ("seed", "index", "rng")

    def __init__(self, seed: int, index: int = 0) -> None:
        self.seed = validate_seed(seed)
        if index < 0:
            raise ValueError("stream index must be non-negative")
        self.index = int(index)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.index,))
        self.rng = np.random.default_rng(sequence)

    def spawn(self, index: int) -> "RandomStream":
        """Return the sibling stream ``(seed, index)``."""
        return RandomStream(self.seed, index)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, index={self.index})"
