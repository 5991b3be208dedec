"""Named, seeded random streams.

Every consumer of randomness asks for a generator keyed by
``(seed, stream name, *keys)`` so that adding draws to one stream can never
shift the draws seen by another one.
"""

import zlib

import numpy as np

STREAMS = ("init", "dropout", "sampling", "data", "gen", "eval")


def stream(seed, name, *keys):
    if name not in STREAMS:
        raise ValueError(f"unknown rng stream {name!r}")
    words = [int(seed), zlib.crc32(name.encode())] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))
