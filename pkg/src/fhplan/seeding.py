"""Deterministic seed derivation for reproducible Monte-Carlo substreams.

All randomness in the package flows from one master seed. Substreams
(per realization, per AP, per heuristic run, ...) get their own 64-bit
seed derived by hashing the master seed together with a label path.
SHA-256 is used instead of Python's builtin hash, which is salted per
process and therefore useless for reproducibility.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *parts) -> int:
    """Derive a stable 64-bit substream seed from a master seed and labels.

    Identical (master, parts) always map to the identical seed, on any
    platform and in any process.
    """
    token = "|".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_from(master: int, *parts) -> np.random.Generator:
    """Convenience: a fresh generator seeded from a derived substream."""
    return np.random.default_rng(derive_seed(master, *parts))
