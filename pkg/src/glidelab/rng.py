"""Seeded random streams.

Paths are grouped into fixed-size chunks of ``CHUNK`` consecutive path
indices. Chunk ``k`` of purpose ``tag`` draws from
``PCG64(SeedSequence(seed, spawn_key=(tag, k)))``, so path ``i`` always sees
the same numbers no matter how chunks are scheduled.
"""
import numpy as np

CHUNK = 16384

# purpose tags
MARKET = 1
BOOTSTRAP = 2
RETURNS = 3


def stream(seed: int, tag: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(tag), int(chunk)))
    return np.random.Generator(np.random.PCG64(ss))


def chunks(n: int, size: int = CHUNK):
    """Yield (chunk_index, start, stop) covering ``range(n)``."""
    for k, start in enumerate(range(0, n, size)):
        yield k, start, min(start + size, n)
