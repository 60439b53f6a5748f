"""
Every random draw in the package goes through derive(): a Philox
(counter-based) generator keyed by the master seed, an operation tag and
any number of integer indices. Two calls with the same key produce the
same stream no matter in which order, process or thread they happen, so
replicates can be evaluated in any order and still reduce to the same
result
"""

import zlib

import numpy as np

MAX_SEED = 2 ** 63 - 1


def tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode())


def derive(seed: int, tag: str, *indices: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f'seed must be non-negative, got {seed}')

    sequence = np.random.SeedSequence([int(seed), tag_code(tag), *map(int, indices)])

    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, tag: str, *indices: int) -> int:
    """
    A plain integer seed for a sub-operation (e.g. the r-th repeat of a test),
    for APIs that take seeds instead of generators
    """

    sequence = np.random.SeedSequence([int(seed), tag_code(tag), *map(int, indices)])

    return int(sequence.generate_state(1, dtype=np.uint64)[0] & MAX_SEED)


def uniform_permutations(rng: np.random.Generator, rows: int, size: int) -> np.ndarray:
    """
    rows independent uniform permutations of range(size), one per row
    """

    return np.argsort(rng.random((rows, size)), axis=1, kind='stable')
