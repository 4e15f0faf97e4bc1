"""Deterministic RNG stream derivation.

Every random draw in a run comes from a stream keyed by the master seed
plus a purpose code and indices, so results are bit-identical regardless
of evaluation order or parallelism.
"""

from __future__ import annotations

import numpy as np

PURPOSE_TRAIN = 1
PURPOSE_EVAL = 2

SCENARIO_CODES = {"none": 0, "sensor": 1, "actuator-current": 2}
CONTROLLER_CODES = {"naive_pid": 0, "lb_pid": 1}


def derive_seed(master_seed: int, *keys: int) -> int:
    """Collapse (master seed, keys...) into a single integer seed."""
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), *[int(k) for k in keys]]))
