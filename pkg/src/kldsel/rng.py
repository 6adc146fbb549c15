"""Counter-based random streams keyed by (seed, replication, purpose).

Every stream is an independent Philox generator whose key is derived from
``SeedSequence(seed, spawn_key=(rep_index, purpose))``. Results therefore do
not depend on the order or process in which replications run.
"""

from __future__ import annotations

import numpy as np

__all__ = ["PURPOSES", "stream"]

PURPOSES = {"sample": 0, "bootstrap": 1, "misc": 2}


def stream(seed: int, rep_index: int = 0, purpose: str = "sample") -> np.random.Generator:
    if purpose not in PURPOSES:
        raise KeyError(f"unknown stream purpose {purpose!r}")
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(int(rep_index), PURPOSES[purpose]))
    return np.random.Generator(np.random.Philox(ss))
