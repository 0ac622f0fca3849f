"""Seed derivation.

Every random choice in the package flows from one integer seed.  Sub-seeds for
individual phases are derived by hashing the parent seed together with a
sequence of labels, so adding a new phase never perturbs existing ones::

    derive_seed(seed, "guardband", "tight")

is SHA-256 over ``"<seed>/guardband/tight"``, truncated to 63 bits.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, *labels) -> int:
    key = "/".join([str(int(seed))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *labels))
