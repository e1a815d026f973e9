"""Counter-based random streams keyed by integer tuples such as ``(seed, replicate)``."""

import numpy as np


def stream(*keys: int) -> np.random.Generator:
    """Independent Philox generator for the key ``keys``.

    The same key always yields the same stream, whatever order or thread the
    replicates run in.
    """
    if not keys:
        raise ValueError("stream needs at least one key")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in keys])))
