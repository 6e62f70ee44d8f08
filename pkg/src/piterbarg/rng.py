"""Counter-based seed derivation.

Every replication gets its own generator keyed by ``(root, stream..., rep)``
so results do not depend on how replications are scheduled over workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

# stream tags; keep values stable, they are part of the reproducibility contract
PATHS = 0
MIXING = 1
FIELD = 2
POINTS = 3
G_MC = 4


def rep_generator(root: int, rep: int, *stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(root), spawn_key=(*map(int, stream), int(rep)))
    return np.random.Generator(np.random.Philox(ss))


def rep_normals(root: int, reps: Sequence[int], size: int, *stream: int,
                out: np.ndarray | None = None) -> np.ndarray:
    """Stack ``size`` standard normals per replication index into rows."""
    if out is None:
        out = np.empty((len(reps), size))
    for i, rep in enumerate(reps):
        rep_generator(root, rep, *stream).standard_normal(size, out=out[i])
    return out


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("PITERBARG_WORKERS", "1")))
    except ValueError:
        return 1


def chunked_map(fn: Callable[[range], np.ndarray], reps: int, chunk: int,
                workers: int | None = None) -> list:
    """Apply ``fn`` to consecutive rep ranges; results come back in rep order."""
    chunks = [range(s, min(s + chunk, reps)) for s in range(0, reps, chunk)]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))
