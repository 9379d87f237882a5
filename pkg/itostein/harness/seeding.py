import typing as t

import numpy as np

_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def split_seed(master_seed: int, index: int) -> int:
    """Seed of the ``index``-th path stream derived from ``master_seed``.

    The map is a bijection of ``index`` for a fixed master seed, so distinct paths never share a stream,
    and it only depends on its two arguments, so seeds are identical for every worker count.
    """
    if index < 0:
        raise ValueError(f"Path index must be nonnegative, got {index}.")
    return _mix((master_seed + (index + 1) * _GOLDEN_GAMMA) & _MASK)


def split_seeds(master_seed: int, indices: t.Iterable[int]) -> np.ndarray:
    """Vectorized ``split_seed`` over a batch of path indices."""
    indices = np.fromiter(indices, dtype=np.int64)
    if np.any(indices < 0):
        raise ValueError(f"Path indices must be nonnegative, got {int(indices.min())}.")
    with np.errstate(over="ignore"):
        z = np.uint64(master_seed & _MASK) + (indices.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))
