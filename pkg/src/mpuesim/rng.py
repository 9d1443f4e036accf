"""Named random substreams derived from one master seed."""

from __future__ import annotations

import numpy as np

STREAMS = {"drop": 0, "shadow": 1, "fading": 2, "scheduling": 3, "measurement": 4}


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for one named stream; independent of which other streams are used."""
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))
