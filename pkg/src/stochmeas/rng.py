"""Splittable, counter-based random streams.

Every stochastic object in the library (a noise realization, a walk, an
ensemble sample) draws from its own Philox stream keyed by
``(seed, stream, index)``.  A realization therefore depends only on its key,
never on how many other realizations were drawn before it or on which thread
produced it.
"""

from __future__ import annotations

import numpy as np

# stream identifiers; distinct purposes never share a key
NOISE = 0
WALK = 1
ENSEMBLE = 2
PROPERTY = 3

_MASK64 = (1 << 64) - 1


def stream(seed: int, kind: int, index: int) -> np.random.Generator:
    """Return the generator for realization ``index`` of stream ``kind``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence(int(seed) & _MASK64, spawn_key=(int(kind), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def signs(gen: np.random.Generator, shape) -> np.ndarray:
    """Independent fair +-1 entries as int8."""
    return (gen.integers(0, 2, size=shape, dtype=np.int8) * 2 - 1).astype(np.int8)
