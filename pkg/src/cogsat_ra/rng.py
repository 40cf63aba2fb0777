"""Deterministic random streams.

Every random draw in the package comes from a Philox-4x64 counter-based
generator (``numpy.random.Philox``).  Its key is derived with
``numpy.random.SeedSequence(entropy=seed, spawn_key=(stream, trial, ...))``,
so a stream is a pure function of ``(seed, stream id, trial index, extra)``
and independent trials can be generated in any order or in parallel
processes without changing results.
"""
from __future__ import annotations

import numpy as np

# Stream identifiers. Changing these changes every result.
PU_STREAM = 1
SU_STREAM = 2
SHADOW_STREAM = 3
BEAM_SHADOW_STREAM = 4
SOLVER_STREAM = 5

ALGORITHM = "philox4x64-seedsequence"


def stream(seed: int, stream_id: int, *counters: int) -> np.random.Generator:
    """Return the generator for ``(seed, stream_id, *counters)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id), *map(int, counters)))
    return np.random.Generator(np.random.Philox(ss))


def trial_seed(seed: int, trial: int) -> int:
    """64-bit seed for one trial, derived from the run seed and trial index."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(0, int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
