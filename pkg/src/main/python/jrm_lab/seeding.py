"""Deterministic seed derivation shared by every generator in the lab"""
import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Derives a 63-bit seed from an ordered tuple of ints and strings"""
    entropy = []
    for part in parts:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            entropy.append(int.from_bytes(digest[:8], "little"))
        else:
            entropy.append(int(part) & 0xFFFFFFFFFFFFFFFF)
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & 0x7FFFFFFFFFFFFFFF


def make_rng(*parts) -> np.random.Generator:
    """numpy generator seeded from derive_seed"""
    return np.random.default_rng(derive_seed(*parts))
