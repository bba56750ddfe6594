import hashlib

import numpy as np


def purpose_key(purpose: str) -> int:
    digest = hashlib.blake2b(purpose.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, purpose: str) -> np.random.Generator:
    """
    Seeded generator for one labelled purpose

    Streams for different purposes under the same seed are independent;
    the same (seed, purpose) always replays the same draws.
    """
    if seed < 0:
        raise ValueError("seeds must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([seed, purpose_key(purpose)]))


def derived_seed(seed: int, purpose: str, index: int) -> int:
    sequence = np.random.SeedSequence([seed, purpose_key(purpose), index])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def trial_seed(seed: int, trial: int) -> int:
    """Sub-seed for the trial-th repetition of an experiment"""
    return derived_seed(seed, "trial", trial)
