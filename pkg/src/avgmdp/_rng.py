"""Reproducible random number streams.

All simulation code draws from counter-based Philox (4x64) generators so
that results are bit-identical across platforms and independent of
execution order.  Each trajectory gets its own stream, keyed by
``seed XOR trajectory_index``, so parallel and sequential runs agree.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for trajectory ``index`` of a run seeded with ``seed``."""
    key = (int(seed) ^ int(index)) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))
