"""Deterministic random stream addressing.

Every stochastic routine draws from a Generator obtained here.  Streams are
keyed by (master_seed, domain, index...), so a given path or chain sees the
same noise regardless of batch layout or worker count.
"""

from __future__ import annotations

import numpy as np

# domain tags; one per independent consumer of randomness
DOMAIN_PATH = 0       # SDE paths
DOMAIN_CHAIN = 1      # ergodic chains
DOMAIN_SERIES = 2     # limit process series sampling
DOMAIN_MEASURE = 3    # measure resampling / bootstrap
DOMAIN_MC = 4         # generic Monte Carlo

__all__ = [
    "substream",
    "DOMAIN_PATH",
    "DOMAIN_CHAIN",
    "DOMAIN_SERIES",
    "DOMAIN_MEASURE",
    "DOMAIN_MC",
]


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given address.

    Uses counter-based bit generation, so streams with different keys are
    statistically independent and reproducible in isolation.
    """
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(k) for k in key)
    )
    return np.random.Generator(np.random.Philox(ss))
