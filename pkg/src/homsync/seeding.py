"""Deterministic seed derivation.

Child random generators are derived from the master seed and a component
path string through SHA-256, so any component can be re-simulated in
isolation and concurrent replicas stay reproducible:

    child_seed = sha256(f"{master_seed}:{path}") -> first 8 bytes, big endian
"""

import hashlib

import numpy as np


def child_seed(master_seed: int, path: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{path}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(master_seed: int, path: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(master_seed, path))


def as_rng(seed_or_rng) -> np.random.Generator:
    """Accept either an integer seed or an existing Generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
