"""Seeded random streams.

Every sampler draws from numpy's Philox4x64-10 counter-based bit generator
keyed by a :class:`numpy.random.SeedSequence`.  Child streams (restarts,
repeats, seeds of a replication) are obtained with ``SeedSequence.spawn`` so
results do not depend on execution order.  ``STREAM_VERSION`` is bumped
whenever a sampling order changes.
"""
import numpy as np

STREAM_VERSION = 1
DEFAULT_SEED = 20210510


def make_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def child_seeds(seed, n):
    """``n`` independent integer seeds derived from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in ss.spawn(n)]


def child_seed(seed, *path):
    """Deterministic seed addressed by an integer path below ``seed``."""
    return int(np.random.SeedSequence([int(seed), *map(int, path)])
               .generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
