from enum import IntEnum
from typing import Optional, Sequence, Union

import numpy as np

SeedLike = Union[int, Sequence[int]]
"""Seed of a numpy generator: an integer or a sequence of non-negative integers"""


class Stream(IntEnum):
    """Independent random streams drawn from a run seed"""

    INIT = 0
    DATA = 1
    MASKING = 2
    DROPOUT = 3
    EVALUATION = 4
    GENERATION = 5


class RandomNumberGenerator:
    """
    Run-level source of numpy generators.

    Every consumer asks for its own child generator keyed by a stream and
    optional indices, so the values it sees do not depend on how many draws
    other consumers made before it. Generation of episode `i` of a dataset
    always uses the child `(seed, Stream.GENERATION, i)`, which keeps the
    output independent of the number of worker threads.
    """

    def __init__(self, seed: int) -> None:
        """Initialize the random number generator.

        Args:
            seed (int): run seed, a non-negative integer
        """
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}.")
        self.seed = seed

    def child(self, stream: Stream, *keys: int) -> np.random.Generator:
        """Derive a generator for a stream.

        Args:
            stream (Stream): the consumer of the generator
            keys (int): further non-negative integers, e.g. an episode index

        Returns:
            a generator seeded from (seed, stream, *keys)
        """
        return np.random.default_rng([self.seed, int(stream), *keys])


def as_generator(rng: Optional[np.random.Generator], seed: int = 0) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng(seed)
