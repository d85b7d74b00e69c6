"""Counter-based random numbers keyed by (master seed, replica, step).

Every draw is a pure function of its key, so a replica's stream does not
depend on how replicas are split across workers or in which order they run.
The mixer is the SplitMix64 finalizer applied to a Weyl-sequence counter.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_REPLICA_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def replica_key(seed, replica):
    return mix64(mix64(np.uint64(seed)) ^ (np.uint64(replica + 1) * _REPLICA_SALT))


@nb.njit(inline="always", cache=True)
def uniform(key, counter):
    """Uniform on [0, 1) with 53 random bits."""
    return (mix64(key + np.uint64(counter + 1) * GOLDEN) >> _S11) * _INV53


@nb.njit(inline="always", cache=True)
def normal(key, counter):
    """Standard normal via Box-Muller on counters 2c and 2c+1."""
    u1 = uniform(key, 2 * counter)
    u2 = uniform(key, 2 * counter + 1)
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit(cache=True)
def _uniform_block(seed, replicas, steps, out):
    for i in range(replicas.shape[0]):
        key = replica_key(seed, replicas[i])
        for k in range(steps.shape[0]):
            out[i, k] = uniform(key, steps[k])


def uniforms(seed: int, replicas, steps) -> np.ndarray:
    """Array of keyed uniforms, shape (len(replicas), len(steps)).

    Gives exactly the draws the simulation kernels consume, which lets tests
    replay a replica by hand.
    """
    r = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    s = np.atleast_1d(np.asarray(steps, dtype=np.int64))
    out = np.empty((r.size, s.size))
    _uniform_block(np.uint64(seed % 2**64), r, s, out)
    return out


def seed_u64(seed: int) -> np.uint64:
    if seed < 0:
        raise ValueError("master_seed must be non-negative")
    return np.uint64(seed % 2**64)
