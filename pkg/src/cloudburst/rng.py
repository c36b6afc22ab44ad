"""Deterministic derivation of independent random streams.

Each consumer of randomness derives its own generator from the run seed
plus a path of string labels, so adding or removing one consumer never
shifts the draws seen by another.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *labels: object) -> int:
    """Hash (root, labels...) into a 64-bit seed."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")


def stream(root: int, *labels: object) -> np.random.Generator:
    """A PCG64 generator keyed by (root, labels...)."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, *labels)))
