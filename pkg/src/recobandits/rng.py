"""Deterministic derivation of independent random streams.

Every stochastic component draws from a generator derived from
``(master_seed, *path)`` via counter-based seed-sequence spawn keys, so a
run's results depend only on the seed and the logical role of each stream,
never on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np

# Stream roles, used as the leading element of a derivation path.
MODEL_STREAM = 0
NOISE_STREAM = 1
POLICY_STREAM = 2


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for the given derivation path.

    Streams with different paths are statistically independent; the same
    (seed, path) pair always yields the same stream.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
