"""Deterministic RNG derivation.

Every random draw in the toolkit flows from an explicit seed through
``derive_rng``; nothing reads ambient process randomness. Purpose codes
keep streams for unrelated uses (init, shuffling, dropout, data
generation) independent even under the same run seed.
"""

from __future__ import annotations

import numpy as np

INIT = 1
SHUFFLE = 2
DROPOUT = 3
SYNTH = 4
GRADCHECK = 5


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """A generator keyed by ``(seed, *keys)``; same keys, same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
