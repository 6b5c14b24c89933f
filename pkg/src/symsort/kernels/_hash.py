"""SplitMix64 mixing, vectorized over numpy uint64 arrays.

A key's symbol stream is the SplitMix64 sequence started at its key seed,
accessed by index: output ``i`` is ``mix64(seed + (i + 1) * GOLDEN)``. The
same construction derives child seeds from a parent seed and an integer
label, which gives collision-resistant, order-independent substreams.
"""

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
KEY_DOMAIN = 0x6B65792D73747265  # separates key-seed derivation from symbol streams
MASK64 = (1 << 64) - 1

_U53 = 2.0**-53


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MUL1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MUL2)
    return z ^ (z >> np.uint64(31))


def stream_at(seed, index):
    """SplitMix64 output number ``index`` of the stream seeded at ``seed``."""
    seed = np.asarray(seed, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = seed + (index + np.uint64(1)) * np.uint64(GOLDEN)
    return mix64(z)


def to_unit(bits):
    """Top 53 bits as a double in [0, 1)."""
    return (np.asarray(bits, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * _U53


def derive_seed(master_seed, labels):
    """Seed for the substream at label path ``labels`` below ``master_seed``."""
    s = mix64(np.uint64(int(master_seed) & MASK64))
    for lab in labels:
        s = stream_at(s, np.uint64(int(lab) & MASK64))
    return int(s)


def key_seeds(master_seed, replicate, n):
    """Key seeds for keys ``0..n-1`` of one replicate, i.e. label paths (replicate, j)."""
    rep = derive_seed(master_seed, (replicate,)) ^ KEY_DOMAIN
    return stream_at(np.uint64(rep), np.arange(n, dtype=np.uint64))
