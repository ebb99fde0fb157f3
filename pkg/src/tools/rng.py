"""
Seeded random streams for reproducible Monte Carlo.

Trials are drawn in fixed-size blocks; block b always comes from
Philox(SeedSequence(seed, spawn_key=(b,))), so a run gives the same numbers
whatever order or thread the blocks are evaluated in.
"""

from typing import List, Tuple

import numpy as np


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of trials"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def block_bounds(trials: int, block_size: int) -> List[Tuple[int, int, int]]:
    """
    Split trials into (block index, start, stop) triples.

    The last block may be short.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if block_size < 1:
        raise ValueError(f"block_size must be >= 1, got {block_size}")
    return [
        (b, start, min(start + block_size, trials))
        for b, start in enumerate(range(0, trials, block_size))
    ]


class SeededStream:
    """numpy Generator that remembers its seed and can fork child streams"""

    def __init__(self, seed: int):
        self._seed = int(seed)
        self._seq = np.random.SeedSequence(self._seed)
        self.generator = np.random.Generator(np.random.Philox(self._seq))

    @property
    def seed(self) -> int:
        return self._seed

    def fork(self) -> np.random.Generator:
        """Independent child generator; successive forks differ"""
        return np.random.Generator(np.random.Philox(self._seq.spawn(1)[0]))
