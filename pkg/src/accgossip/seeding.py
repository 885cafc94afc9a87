"""Deterministic RNG streams derived from a single master seed.

Every source of randomness in the package flows through `derive_rng`, so a
run is a pure function of its seed. Streams are addressed by a domain tag
plus indices; distinct domains never collide regardless of how many
trailing indices they use.
"""

import numpy as np

DOMAIN_PLACEMENT = 0   # random-geometric-graph point placement, per attempt
DOMAIN_START = 1       # per-trial starting vectors
DOMAIN_ACTIVATION = 2  # per-trial, per-method edge/row activation sequences


def derive_rng(seed, *key: int) -> np.random.Generator:
    """PCG64 generator for the sub-stream of `seed` addressed by `key`."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
