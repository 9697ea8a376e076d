"""Counter-based deterministic random streams.

Every stochastic routine in the toolkit draws from ``stream(seed, *lane)``,
a Philox generator keyed by the seed plus integer lane indices.  Streams
with distinct lanes are independent, and the same (seed, lane) always
reproduces the same draws regardless of execution order, so results are
identical under any parallel schedule.
"""
import numpy as np


def stream(seed: int, *lane: int) -> np.random.Generator:
    """Return an independent generator for the given seed and lane indices."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in lane))
    return np.random.Generator(np.random.Philox(ss))
