"""Counter-based random streams: one Philox stream per (seed, task index)."""
from __future__ import annotations

import numpy as np


def task_rng(seed: int, task: int, *path: int) -> np.random.Generator:
    """Stream for task ``task`` (optionally nested by ``path``) of a run seeded with ``seed``.

    Streams never depend on how tasks are scheduled across workers.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(task), *map(int, path)))
    return np.random.Generator(np.random.Philox(ss))


# task indices, fixed so that adding an experiment never shifts another's streams
TASK_SLOPE = 0
TASK_ORBIT_SEEDS = 1
TASK_MIXING = 2
TASK_LYAPUNOV_SEEDS = 3
