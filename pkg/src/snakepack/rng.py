"""Deterministic random-stream construction.

Every sampler in the package is a pure function of its parameters and a
(seed, stream) pair.  Streams are derived through ``numpy.random.SeedSequence``
spawn keys, so replicas with distinct stream ids are statistically independent
and bit-reproducible, and results merged over streams do not depend on
execution order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["make_rng", "stream_rngs"]


def make_rng(seed, stream: int = 0) -> np.random.Generator:
    """Return the PCG64 generator for one (seed, stream) pair.

    ``seed`` may be an int or a ``SeedSequence``; ``stream`` selects an
    independent substream.  Calling twice with equal arguments yields
    bit-identical draw sequences.
    """
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    else:
        base = np.random.SeedSequence(int(seed))
    child = np.random.SeedSequence(
        entropy=base.entropy, spawn_key=base.spawn_key + (int(stream),)
    )
    return np.random.Generator(np.random.PCG64(child))


def stream_rngs(seed, n: int, offset: int = 0):
    """Generators for streams ``offset .. offset+n-1`` of ``seed``."""
    return [make_rng(seed, offset + i) for i in range(n)]
