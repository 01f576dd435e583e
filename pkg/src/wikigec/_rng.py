"""Seed derivation shared by every stochastic stage.

All randomness is drawn from numpy generators keyed by a tuple of
non-negative integers, e.g. ``(global_seed, page_id, revision_id)``, so
results do not depend on scheduling or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(*keys) -> np.random.Generator:
    """Return a PCG64 generator seeded from ``keys`` (ints or strings)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([_as_key(k) for k in keys])))


def derive_seed(*keys) -> int:
    """Collapse ``keys`` into a single 64-bit seed."""
    return int(np.random.SeedSequence([_as_key(k) for k in keys]).generate_state(1, np.uint64)[0])
