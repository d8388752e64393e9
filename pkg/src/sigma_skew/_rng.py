"""Keyed counter-based random streams.

Every draw in the package comes from a Philox stream whose 128-bit key is a
hash of integer coordinates ``(seed, replicate, stream tag, sub-index)``.
The n-th output of a stream depends only on its key and n, so results never
depend on ensemble size, chunking or thread scheduling.
"""

import numpy as np

# stream tags
BM = 1
BM_SECOND = 2
SIGN = 3
REPLICATE = 4

_MASK64 = (1 << 64) - 1


def keyed_generator(*coords: int) -> np.random.Generator:
    coords = [int(c) & _MASK64 for c in coords]
    key = np.random.SeedSequence(coords).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, replicate: int, tag: int = REPLICATE) -> int:
    """64-bit child seed for one replicate; a pure function of its inputs."""
    state = np.random.SeedSequence([int(seed) & _MASK64, int(replicate), int(tag)])
    return int(state.generate_state(1, np.uint64)[0])
