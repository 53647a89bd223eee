"""
Seed derivation shared by every stochastic stage.

Child seeds come from a SplitMix64 step over (master, stream index), so adding
trees, restarts or organizations never reshuffles the streams before them.
"""
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for stream `index` under `master_seed`"""
    mixed = (int(master_seed) & MASK64) ^ splitmix64(int(index) & MASK64)
    return splitmix64(mixed)


def make_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, index))
