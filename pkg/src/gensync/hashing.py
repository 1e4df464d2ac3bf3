"""Seeded 64-bit mixing used by the IBLT and cuckoo sketches.

The mixer is the splitmix64 finalizer. It is fixed and documented so that
serialized sketches stay portable: two peers that agree on a seed derive
identical cell indices, check hashes and fingerprints.
"""

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """Avalanche a 64-bit value (splitmix64 finalizer)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Derive the ``index``-th subordinate seed from a master seed."""
    return mix64((seed + (index + 1) * _GOLDEN) & MASK64)


def keyed_hash(seed: int, key: int) -> int:
    """Hash ``key`` under a derived seed; uniform over the 64-bit range."""
    return mix64(key ^ seed)
