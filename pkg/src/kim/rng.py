"""Seeded random streams.

Every source of randomness in the toolkit derives from one global seed
through named sub-streams, so partial re-runs (e.g. re-evaluating without
re-training) see the same draws.
"""

import hashlib

import numpy as np


def _stable_hash(name: str) -> int:
    # Python's hash() is salted per process; use sha256 for stability.
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")


def substream(seed: int, *names: str) -> np.random.Generator:
    """Generator for the sub-stream identified by `names` under `seed`."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_stable_hash(n) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def subseed(seed: int, *names: str) -> int:
    """A derived integer seed for components that take plain seeds."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_stable_hash(n) for n in names]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
