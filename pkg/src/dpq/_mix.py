"""Counter-based random number generation.

Every Bernoulli draw in the package is a pure function of
``(seed, sample, time, site)``.  That makes trajectories reproducible
independent of evaluation order, chunking and thread count: parallel code
never shares generator state, it just evaluates a hash.

The construction is the random-access form of the splitmix64 sequence:
draw ``i`` of the stream with key ``k`` is ``mix64(k + (i + 1) * GOLDEN)``
where ``mix64`` is the Stafford mix13 finalizer.  The same constants are
inlined in the compiled kernels (:mod:`dpq._kernels`); a regression test
keeps the two implementations identical.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U53 = np.float64(1.0 / (1 << 53))

__all__ = ["GOLDEN", "mix64", "stream_key", "draw_u64", "uniform"]


def mix64(z):
    """Stafford mix13 avalanche of a uint64 (array capable, wraps mod 2**64)."""
    with np.errstate(over="ignore"):
        z = np.asarray(z, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def stream_key(seed, sample):
    """Key of the per-sample stream; distinct samples never collide."""
    with np.errstate(over="ignore"):
        k0 = mix64(np.uint64(seed) + GOLDEN)
        return mix64(k0 + np.asarray(sample, dtype=np.uint64) * GOLDEN)


def draw_u64(key, counter):
    """Draw ``counter`` of stream ``key`` as a raw uint64."""
    with np.errstate(over="ignore"):
        c = np.asarray(counter, dtype=np.uint64)
        return mix64(np.asarray(key, dtype=np.uint64) + (c + np.uint64(1)) * GOLDEN)


def uniform(key, counter):
    """Uniform in [0, 1) with 53 random bits, from (key, counter)."""
    return (draw_u64(key, counter) >> np.uint64(11)).astype(np.float64) * _U53


def row_counter(time, site):
    """Pack a (time, site) pair into one draw counter."""
    t = np.asarray(time, dtype=np.uint64)
    x = np.asarray(site, dtype=np.uint64)
    return (t << np.uint64(32)) | x


def plane_counter(time, x, z):
    """Pack a (time, x, z) triple into one draw counter."""
    t = np.asarray(time, dtype=np.uint64)
    xs = np.asarray(x, dtype=np.uint64)
    zs = np.asarray(z, dtype=np.uint64)
    return (t << np.uint64(42)) | (xs << np.uint64(21)) | zs
