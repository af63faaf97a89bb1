"""Counter-based seed derivation.

A replicate's seed is ``mix(mix(master) ^ pack(ensemble, n, replicate))``
where ``mix`` is the SplitMix64 finalizer.  ``mix`` is a bijection of 64-bit
words and ``pack`` is injective on its bit ranges, so distinct index
triples can never share a seed within a run.
"""
from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

ENSEMBLE_BITS = 8
N_BITS = 16
REPLICATE_BITS = 40


def splitmix64(z: int) -> int:
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def pack_indices(ensemble_index: int, n: int, replicate_index: int) -> int:
    for name, value, bits in (
        ("ensemble_index", ensemble_index, ENSEMBLE_BITS),
        ("n", n, N_BITS),
        ("replicate_index", replicate_index, REPLICATE_BITS),
    ):
        if not 0 <= value < (1 << bits):
            raise ValueError(f"{name}={value} does not fit in {bits} bits")
    return (ensemble_index << (N_BITS + REPLICATE_BITS)) | (n << REPLICATE_BITS) | replicate_index


def derive_seed(master_seed: int, ensemble_index: int, n: int, replicate_index: int) -> int:
    """64-bit seed for one replicate."""
    return splitmix64(splitmix64(master_seed & MASK64) ^ pack_indices(ensemble_index, n, replicate_index))
