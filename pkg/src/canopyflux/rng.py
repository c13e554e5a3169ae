"""Deterministic random-stream derivation.

Every stochastic component (bootstrap draws, per-node feature sampling,
fold shuffles, synthetic noise) pulls from a generator derived from a base
seed plus a tuple of small integer tags. Derivation goes through
``numpy.random.SeedSequence``, which hashes the tag tuple platform
independently, so results do not depend on scheduling, thread count, or
evaluation order.

Tag namespaces in use: 1 = forest trees, 2 = CV fold shuffles,
3 = CV resample fits, 4 = final full-data fit, 5 = synthetic generator.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *tags: int) -> np.random.Generator:
    """Generator for the stream identified by ``(seed, *tags)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, tags)])))


def derive_seed(seed: int, *tags: int) -> int:
    """Stable integer sub-seed for the stream identified by ``(seed, *tags)``."""
    ss = np.random.SeedSequence([int(seed), *map(int, tags)])
    return int(ss.generate_state(1, np.uint64)[0])
