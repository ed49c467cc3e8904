"""Counter-based uniforms keyed by (seed, trial, vertex).

A splitmix64 finalizer is applied to ``trial_key(seed, trial) + v * GOLDEN``;
the top 53 bits give a uniform in [0, 1). The numpy and numba versions agree
bit for bit, so any vertex colour can be recomputed in isolation.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TRIAL = np.uint64(0xD1B54A32D192ED03)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def as_seed(seed: int) -> np.uint64:
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


@njit(cache=True, inline="always")
def mix64(x):
    z = x + GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def trial_key(seed, trial):
    return mix64(mix64(np.uint64(seed)) ^ (np.uint64(trial) * _TRIAL))


@njit(cache=True, inline="always")
def vertex_uniform(key, v):
    return np.float64(mix64(np.uint64(key) + np.uint64(v) * GOLDEN) >> _S11) * _INV53


def _mix64_np(x: np.ndarray) -> np.ndarray:
    z = x + GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def uniforms(seed: int, trial: int, n: int) -> np.ndarray:
    """Uniforms of vertices ``0..n-1`` for one trial (matches :func:`vertex_uniform`)."""
    with np.errstate(over="ignore"):
        s = np.array([as_seed(seed)], dtype=np.uint64)
        key = _mix64_np(_mix64_np(s) ^ (np.array([trial], dtype=np.uint64) * _TRIAL))
        h = _mix64_np(key + np.arange(n, dtype=np.uint64) * GOLDEN)
    return (h >> _S11).astype(np.float64) * _INV53
