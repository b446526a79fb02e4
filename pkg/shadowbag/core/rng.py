"""
Named random sub-streams fanned out of one run seed.

Every consumer asks for its stream by name, so adding a new consumer never shifts the
numbers another one sees. Draw order inside a stream is fixed by the consumer:
the Haar stream is read as an (N, L, 3) block, snapshot l outer, site j inner,
(gamma0, gamma1, gamma3) per pair.
"""

import numpy as np

STREAMS = {
    "haar": 0,
    "born": 1,
    "lanczos": 2,
}


def stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise KeyError(f"Unknown random stream '{name}'")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(STREAMS[name],))
    return np.random.default_rng(seq)
