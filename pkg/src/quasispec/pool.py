"""Deterministic work pool for per-energy sweeps.

Energies are cut into contiguous chunks; each chunk is evaluated by a pure
function and the results are concatenated in chunk order, so the output does
not depend on the number of workers or on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np


def map_chunks(fn: Callable[[np.ndarray], np.ndarray], energies: np.ndarray, threads: int = 1,
               chunk: int = 64) -> np.ndarray:
    energies = np.ascontiguousarray(energies, dtype=np.float64)
    pieces = [energies[i : i + chunk] for i in range(0, energies.size, chunk)]
    if threads <= 1 or len(pieces) <= 1:
        results = [fn(p) for p in pieces]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(fn, pieces))
    if not results:
        return np.zeros(0)
    return np.concatenate(results)
