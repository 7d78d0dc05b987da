"""
Seed discipline.

A run has one master seed. Trajectory ``i`` draws from the stream ``SeedSequence(seed, spawn_key=(i,))`` which is
the ``i``-th child :meth:`numpy.random.SeedSequence.spawn` would produce, so every trajectory sees the same numbers
no matter how trajectories are distributed over workers. Initial conditions are drawn first, then the per-step
normals in the order :math:`\\xi_0, \\xi_1, \\ldots, \\xi_N`.
"""
from typing import List, Sequence

import numpy as np
from numpy.random import Generator, SeedSequence, default_rng

SEED_LIMIT = 2 ** 64


def validate_seed(seed: int) -> int:
    """ Return the seed as int.

    Raises
    ------
    RuntimeError
        If the seed is missing, not an integer or outside [0, 2**64)
    """
    if seed is None or isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < SEED_LIMIT:
        raise RuntimeError(f"Can't use seed {seed!r}: seeds have to be integers in [0, 2**64)")
    return int(seed)


def trajectory_stream(seed: int, index: int) -> Generator:
    """ Return the random stream of trajectory `index` under the master `seed`. """
    return default_rng(SeedSequence(validate_seed(seed), spawn_key=(int(index),)))


def trajectory_streams(seed: int, indices: Sequence[int]) -> List[Generator]:
    return [trajectory_stream(seed, index) for index in indices]


def draw_noise(streams: Sequence[Generator], n_steps: int, n_modes: int) -> np.ndarray:
    """ Draw the normals of `n_steps` steps for every stream.

    Returns
    -------
    numpy.ndarray
        Shape ``(n_steps, len(streams), n_modes + 1)``; entry ``[j, i, 0]`` drives the velocity of trajectory ``i``
        in step ``j``
    """
    return np.stack([stream.standard_normal((n_steps, n_modes + 1)) for stream in streams], axis=1)
