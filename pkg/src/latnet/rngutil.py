"""Deterministic RNG stream derivation.

All randomness in the package flows through `substream`, which derives an
independent generator from (seed, key...) via numpy's SeedSequence spawn
keys.  Streams therefore depend only on the logical key, never on worker
count or evaluation order, which is what makes seeded runs byte-reproducible
under different --threads settings.
"""

from __future__ import annotations

import numpy as np

# Fixed key-domain tags so unrelated draws can never share a stream.
DOMAIN_CODE = 1
DOMAIN_TRIAL = 2
DOMAIN_DITHER = 3
DOMAIN_MAPPING = 4
DOMAIN_NOISE = 5
DOMAIN_SAMPLER = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return a generator for the stream identified by (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key)))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split `total` items into fixed-size chunks (last one ragged)."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    out = []
    left = total
    while left > 0:
        take = min(chunk, left)
        out.append(take)
        left -= take
    return out
