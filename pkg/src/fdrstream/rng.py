"""Counter-based random streams.

Every replication derives its generator from ``(seed, *keys)`` through
``SeedSequence`` spawn keys feeding a Philox bit generator, so results do not
depend on the order in which replications are executed.
"""
import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed, *keys):
    """Return an independent ``Generator`` for the stream ``(seed, *keys)``."""
    seq = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed, *keys):
    """Derive a plain 64-bit integer seed, handy for child configs and CSV rows."""
    seq = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
