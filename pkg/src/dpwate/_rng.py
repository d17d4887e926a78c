"""Named, independent random streams derived from one integer seed.

Every stage of the pipeline draws from its own counter-based (Philox)
generator, so a single stage can be replayed without running the others.
"""

import zlib

import numpy as np

STAGES = ("data", "partition", "fallback", "eta_tau", "eta_v", "posterior")


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed, *key):
    """Return a Generator for ``seed`` and a tuple of stage labels.

    Labels may be strings or non-negative integers; the same ``(seed, key)``
    always yields the same stream and different keys give independent ones.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
