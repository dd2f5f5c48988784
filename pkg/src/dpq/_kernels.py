"""Compiled kernels for the large sampling scans.

The scans address the lattice in lattice-vector coordinates: vertex
``(u, v)`` (2D) or ``(u, v, w)`` (3D) reads the parents one step in each
negative direction, and the in-flowing boundary layers ``u = -1`` etc.
form the halo fixed by the boundary condition.  A lexicographic sweep then
respects all dependencies, so each sample is a single tight loop.

Randomness reuses the splitmix64 finalizer of :mod:`dpq._mix`: the caller
passes one precomputed stream key per sample, the kernel hashes
``(key, packed site counter)`` per draw.  Nothing here depends on thread
count or chunk layout, which keeps outputs bit reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ONE = np.uint64(1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_S21 = np.uint64(21)
_S32 = np.uint64(32)
_S42 = np.uint64(42)
_INV53 = np.float64(1.0 / (1 << 53))

_SAMPLE_BLOCK = 64


@njit(cache=True, inline="always")
def _u01(key, counter):
    z = key + (counter + _ONE) * _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * _INV53


@njit(cache=True)
def draw_u01(key, counter):
    """Scalar draw, exported for equality tests against dpq._mix."""
    return _u01(np.uint64(key), np.uint64(counter))


@njit(cache=True, parallel=True)
def corner_square_sites(table, L, vbound, keys, tu, tv, out):
    """Sample site values on the corner-boundary square lattice.

    The two in-flowing halo layers are all-active.  ``vbound[u]`` limits
    the sweep to the causal cone of the targets (-1 skips a row).  Writes
    ``out[i, k]`` = value at target k for sample i.
    """
    n = keys.shape[0]
    nblocks = (n + _SAMPLE_BLOCK - 1) // _SAMPLE_BLOCK
    for b in prange(nblocks):
        w = np.empty((L, L), np.uint8)
        lo = b * _SAMPLE_BLOCK
        hi = min(n, lo + _SAMPLE_BLOCK)
        for i in range(lo, hi):
            key = keys[i]
            for u in range(L):
                vb = vbound[u]
                if vb < 0:
                    break
                uc = np.uint64(u) << _S32
                for v in range(vb + 1):
                    a = w[u - 1, v] if u > 0 else np.uint8(1)
                    c = w[u, v - 1] if v > 0 else np.uint8(1)
                    code = (np.int64(a) << 1) | np.int64(c)
                    r = _u01(key, uc | np.uint64(v))
                    w[u, v] = np.uint8(1) if r < table[code] else np.uint8(0)
            for k in range(tu.shape[0]):
                out[i, k] = w[tu[k], tv[k]]


@njit(cache=True, parallel=True)
def corner_cube_sites(table, L, vbound, wbound, keys, tu, tv, tw, out):
    """3D analogue of :func:`corner_square_sites` (three active halo faces)."""
    n = keys.shape[0]
    nblocks = (n + _SAMPLE_BLOCK - 1) // _SAMPLE_BLOCK
    for b in prange(nblocks):
        cube = np.empty((L, L, L), np.uint8)
        lo = b * _SAMPLE_BLOCK
        hi = min(n, lo + _SAMPLE_BLOCK)
        for i in range(lo, hi):
            key = keys[i]
            for u in range(L):
                vb = vbound[u]
                if vb < 0:
                    break
                wb = wbound[u]
                uc = np.uint64(u) << _S42
                for v in range(vb + 1):
                    vc = uc | (np.uint64(v) << _S21)
                    for ww in range(wb + 1):
                        a = cube[u - 1, v, ww] if u > 0 else np.uint8(1)
                        c = cube[u, v - 1, ww] if v > 0 else np.uint8(1)
                        d = cube[u, v, ww - 1] if ww > 0 else np.uint8(1)
                        code = (np.int64(a) << 2) | (np.int64(c) << 1) | np.int64(d)
                        r = _u01(key, vc | np.uint64(ww))
                        cube[u, v, ww] = np.uint8(1) if r < table[code] else np.uint8(0)
            for k in range(tu.shape[0]):
                out[i, k] = cube[tu[k], tv[k], tw[k]]


@njit(cache=True, parallel=True)
def row_tail_counts(table, Lx, n_steps, tail, periodic, keys, out):
    """Evolve periodic/open rows from all-active, count the active sites
    in the last ``tail`` rows of each sample."""
    n = keys.shape[0]
    for i in prange(n):
        row = np.ones(Lx, np.uint8)
        new = np.empty(Lx, np.uint8)
        key = keys[i]
        total = np.int64(0)
        for s in range(n_steps):
            sc = np.uint64(s) << _S32
            even = s % 2 == 0
            for x in range(Lx):
                if even:
                    xa, xb = x, x + 1
                else:
                    xa, xb = x - 1, x
                if xa < 0:
                    a = row[Lx - 1] if periodic else np.uint8(0)
                else:
                    a = row[xa]
                if xb >= Lx:
                    c = row[0] if periodic else np.uint8(0)
                else:
                    c = row[xb]
                code = (np.int64(a) << 1) | np.int64(c)
                r = _u01(key, sc | np.uint64(x))
                new[x] = np.uint8(1) if r < table[code] else np.uint8(0)
            tmp = row
            row = new
            new = tmp
            if s >= n_steps - tail:
                for x in range(Lx):
                    total += row[x]
        out[i] = total
