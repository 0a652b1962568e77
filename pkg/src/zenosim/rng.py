"""Seeded random streams.

Every consumer of randomness in a simulation owns its own stream, keyed by
``(seed, stream)``. Streams are built on numpy's PCG64 seeded through a
``SeedSequence`` whose spawn key is the stream id, so the sequence of draws
depends only on the pair and never on platform or on what other streams did.
"""

from __future__ import annotations

import numpy as np

# Stream ids. Worker streams are WORKER_BASE + worker id.
DATA = 0
INIT = 1
SERVER = 2
FAULT = 3
TEST = 4
ESTIMATE = 5
WORKER_BASE = 1000


class Rng:
    """A counted random stream.

    ``draws`` counts calls made against the stream; the simulator uses it to
    audit the order in which streams were advanced.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise ValueError("seed and stream must be non-negative")
        self.seed = int(seed)
        self.stream = int(stream)
        self.draws = 0
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"Rng(seed={self.seed}, stream={self.stream}, draws={self.draws})"

    def integers(self, high: int, size=None):
        self.draws += 1
        return self._gen.integers(0, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        self.draws += 1
        return self._gen.uniform(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        self.draws += 1
        return self._gen.normal(loc, scale, size=size)

    def choice(self, n: int, size: int, replace: bool = False):
        self.draws += 1
        return self._gen.choice(n, size=size, replace=replace)


def worker_stream(worker_id: int) -> int:
    return WORKER_BASE + worker_id
