"""Seeded, counter-based random streams.

Every independent unit of work (a Monte-Carlo replication, a bootstrap
draw) gets its own Philox stream keyed by ``(seed, *path)``. Streams do not
depend on how work is scheduled, so serial and threaded runs agree exactly.
"""

import numpy as np

DEFAULT_SEED = 20240501


def stream(seed, *path):
    """Independent generator for the substream identified by ``path``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(rng):
    """Draw a 63-bit seed from ``rng`` for a nested family of streams."""
    return int(rng.integers(0, 2**63 - 1))
