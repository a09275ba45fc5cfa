"""Seeded random streams.

Every random draw in the package comes from a Philox generator keyed by
``(seed, purpose, index)``. Streams for distinct layers or purposes are
statistically independent and can be consumed in any order or in parallel
without changing the result.
"""

import numpy as np

PURPOSES = {
    "population": 1,
    "graph": 2,
    "spiked": 3,
    "warm": 4,
    "channel": 5,
    "cell": 6,
}


def stream(seed, purpose, *index):
    """Return a generator for ``purpose`` and integer sub-indices.

    ``seed=None`` draws fresh OS entropy (non-reproducible).
    """
    try:
        key = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown stream purpose {purpose!r}") from None
    if seed is None:
        ss = np.random.SeedSequence(spawn_key=(key, *index))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(key, *index))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed_base, *index):
    """Deterministic 63-bit integer seed derived from a base seed and indices."""
    ss = np.random.SeedSequence(int(seed_base), spawn_key=tuple(int(i) for i in index))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
