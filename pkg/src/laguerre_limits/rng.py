"""Counter-based random streams keyed by ``(seed, label...)``.

Every replicate and every sub-sampler draws from its own Philox stream, so
results never depend on the order in which work is scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, *labels: object) -> int:
    text = repr((int(seed),) + tuple(str(label) for label in labels)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=16).digest(), "little")


def stream(seed: int, *labels: object) -> np.random.Generator:
    """Return an independent generator for the labelled stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *labels)))


def child_seed(seed: int, *labels: object) -> int:
    """Derive a 63-bit seed for a labelled sub-task."""
    return stream_key(seed, *labels) & ((1 << 63) - 1)
