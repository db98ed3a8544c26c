"""
Deterministic seed derivation.

Child seeds are drawn from ``numpy.random.SeedSequence`` seeded with the
parent seed followed by the integer keys; SeedSequence hashes its entropy
with a fixed, platform-independent mixing function, so a (seed, keys) tuple
always yields the same child seed.
"""

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """32-bit child seed for ``keys`` under ``seed``."""
    state = np.random.SeedSequence([int(seed), *(int(k) for k in keys)]).generate_state(1)
    return int(state[0])
