"""Seed handling: every stochastic entry point accepts an int, a SeedSequence,
a Generator or None, and splits independent child streams from it."""
import numpy as np


def seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    return np.random.SeedSequence(rng)


def spawn(rng, n: int) -> list:
    """``n`` independent generators derived from ``rng``."""
    return [np.random.default_rng(s) for s in seed_sequence(rng).spawn(n)]
