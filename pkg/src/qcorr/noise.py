"""Counter-based noise streams for reproducible parallel Monte Carlo.

Each trajectory owns one Philox-keyed stream; the draw used at (channel c,
step k) sits at a fixed position in that stream. The draw block for a given
(master_seed, trajectory) pair is therefore a pure function of the key,
independent of scheduling, batching, or worker count, and streams with
distinct keys are statistically independent by construction of the
counter-based generator.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

_UINT64_MAX = 2 ** 64 - 1


def check_seed(master_seed: int) -> int:
    if not isinstance(master_seed, (int, np.integer)):
        raise ValidationError(f"master_seed must be an integer, got {type(master_seed).__name__}")
    if not (0 <= int(master_seed) <= _UINT64_MAX):
        raise ValidationError("master_seed must fit in an unsigned 64-bit integer")
    return int(master_seed)


def trajectory_generator(master_seed: int, trajectory_index: int) -> np.random.Generator:
    """Generator for one trajectory, keyed by (master_seed, trajectory_index)."""
    seed = check_seed(master_seed)
    if trajectory_index < 0:
        raise ValidationError(f"trajectory_index must be nonnegative, got {trajectory_index}")
    key = np.array([seed, trajectory_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def trajectory_draws(master_seed: int, trajectory_index: int, n_steps: int, n_channels: int) -> np.ndarray:
    """Standard-normal draw block of shape (n_steps, n_channels).

    Entry [k, c] is the draw consumed by channel c at integration step k;
    identical arguments always return identical arrays.
    """
    gen = trajectory_generator(master_seed, trajectory_index)
    return gen.standard_normal((n_steps, n_channels))
