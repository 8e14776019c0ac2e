"""Seeded counter-based random streams with labelled sub-streams.

All randomized stages in the package draw from Philox generators keyed by
a SHA-256 hash of ``(seed, label)``.  Two consequences we rely on:

- the same (seed, label) pair yields the same stream on every platform,
  independent of how many other streams were consumed before it;
- adding a new randomized stage (new label) never perturbs existing ones.

The contract string below is recorded in dataset metadata so files stay
self-describing.
"""

from __future__ import annotations

import hashlib

import numpy as np

PRNG_CONTRACT = "philox4x64/sha256-label-split/v1"


def substream(seed: int, label: str) -> np.random.Generator:
    """Return the generator for ``label`` under the global ``seed``."""
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    digest = hashlib.sha256(f"{PRNG_CONTRACT}:{int(seed)}:{label}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))
