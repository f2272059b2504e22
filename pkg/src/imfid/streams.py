"""Deterministic random substreams.

Simulations are cut into fixed-size blocks; block ``i`` always draws from
the ``i``-th child of ``SeedSequence(seed)``.  The worker count only decides
which thread runs a block, so results are bit-identical for a given seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK = 4096


def block_sizes(n: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(n, block)
    return [block] * full + ([rest] if rest else [])


def block_generators(seed: int, n_blocks: int, offset: int = 0) -> list[np.random.Generator]:
    root = np.random.SeedSequence(seed)
    return [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(root.entropy, spawn_key=(i,))))
        for i in range(offset, offset + n_blocks)
    ]


def run_blocks(
    fn: Callable[[np.random.Generator, int], object],
    seed: int,
    sizes: Sequence[int],
    workers: int = 1,
    offset: int = 0,
) -> list:
    """Apply ``fn(rng, size)`` to every block; results come back in block order."""
    rngs = block_generators(seed, len(sizes), offset)
    if workers <= 1 or len(sizes) <= 1:
        return [fn(r, s) for r, s in zip(rngs, sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, rngs, sizes))


def uniforms(seed: int, n: int, workers: int = 1, block: int = BLOCK) -> np.ndarray:
    parts = run_blocks(lambda r, s: r.random(s), seed, block_sizes(n, block), workers)
    return np.concatenate(parts) if parts else np.empty(0)
