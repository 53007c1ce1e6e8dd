"""Seedable counter-based random streams.

All stochastic code in the package draws from Philox generators keyed by
(seed, substream indices).  Substream k of a given seed is reproducible on
its own, independent of whether or in which order other substreams were
consumed, so per-trial results can be recomputed in isolation.
"""
from __future__ import annotations

import numpy as np


def substream(seed: int, *indices: int) -> np.random.Generator:
    """Return the generator for one substream of `seed`.

    Same (seed, indices) always yields an identical stream; distinct index
    tuples yield statistically independent streams.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(seq))
