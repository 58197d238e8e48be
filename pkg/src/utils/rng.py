"""Seeded random streams.

All randomness flows from one integer seed through numpy's ``SeedSequence``
into independent PCG64 generators, one per purpose. A stream is identified by
its purpose plus optional integer keys (repeat index, grid point, ...), so
drawing more target samples never moves the source samples.
"""
import numpy as np

PURPOSES = {
    'anchors': 0,
    'source_noise': 1,
    'target_shift': 2,
    'target_noise': 3,
    'split': 4,
    'shuffle': 5,
    'init': 6,
    'sessions': 7,
    'repeat': 8,
    'curve': 9,
}


def stream(seed, purpose, *keys):
    """Return a PCG64 generator for ``purpose`` derived from ``seed``"""
    if purpose not in PURPOSES:
        raise KeyError(f"Unknown random stream purpose: {purpose}")
    seq = np.random.SeedSequence(
        entropy=int(seed), spawn_key=(PURPOSES[purpose], *(int(k) for k in keys))
    )
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed, purpose, *keys):
    """A plain integer seed for a child component (e.g. one repeat of an experiment)"""
    return int(stream(seed, purpose, *keys).integers(0, 2**63 - 1))
