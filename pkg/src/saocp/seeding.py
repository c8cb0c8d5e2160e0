"""Named random sub-streams derived from one run seed.

Every source of randomness in a run (stream noise, classification
randomization draws, randomized expert sampling) pulls from its own child
generator, so toggling one component never perturbs the others.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "SUBSTREAMS"]

SUBSTREAMS = {
    "noise": 1,
    "classification-u": 2,
    "expert-sample": 3,
}


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for the named component of a seeded run."""
    if name not in SUBSTREAMS:
        raise ValueError(f"unknown substream {name!r}; expected one of {sorted(SUBSTREAMS)}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), SUBSTREAMS[name]]))
