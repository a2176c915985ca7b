"""Splittable deterministic random streams.

Every random draw in a run comes from a generator keyed by
(master_seed, owner_id, purpose, round). The key is folded through the
SplitMix64 finaliser, so streams never depend on scheduling or on how many
draws another owner made.
"""
from typing import Optional

import numpy as np

from qdiana.utils.enums import StreamPurpose

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MULTIPLIER_1 = 0xBF58476D1CE4E5B9
MIX_MULTIPLIER_2 = 0x94D049BB133111EB

# Owner id used for draws made by the master (the L-SVRG coin).
MASTER_ID = 0xFFFFFFFF


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_MULTIPLIER_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULTIPLIER_2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *ids: int) -> int:
    state = splitmix64(master_seed & MASK64)
    for value in ids:
        state = splitmix64(state ^ (value & MASK64))
    return state


class RandomStreams:
    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def generator(
            self,
            owner_id: int,
            purpose: StreamPurpose,
            round_index: Optional[int] = 0
    ) -> np.random.Generator:
        seed = derive_seed(self.master_seed, owner_id, int(purpose), round_index or 0)
        return np.random.Generator(np.random.PCG64(seed))

    def worker(self, worker_id: int, purpose: StreamPurpose, round_index: int) -> np.random.Generator:
        return self.generator(worker_id, purpose, round_index)

    def master(self, purpose: StreamPurpose, round_index: int) -> np.random.Generator:
        return self.generator(MASTER_ID, purpose, round_index)
