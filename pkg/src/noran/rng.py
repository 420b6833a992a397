"""Deterministic random streams.

SplitMix64 expands 64-bit seeds into xoshiro256** state; Gaussians come
from Box-Muller so every implementation that follows the same recipe
reproduces the same noise bit for bit. The shared NORAN seed in the
codebook depends on that.

One complex normal sample always consumes exactly two 64-bit outputs,
so position ``i`` in a complex stream starts at raw draw ``2 * i``.
"""

import math

import numpy as np
from numba import njit

__all__ = ["RngStream", "splitmix64", "ALGORITHM"]

ALGORITHM = "xoshiro256**/splitmix64/box-muller"

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x):
    """One SplitMix64 output for state ``x`` (advance then mix)."""
    z = (x + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _expand_seed(seed):
    state = []
    x = seed & MASK64
    for _ in range(4):
        state.append(splitmix64(x))
        x = (x + GOLDEN_GAMMA) & MASK64
    if not any(state):
        # xoshiro must never sit in the all-zero state
        state[0] = 1
    return state


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def _next(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next(s)


@njit(cache=True)
def _skip(s, n):
    for _ in range(n):
        _next(s)


@njit(cache=True)
def _fill_normal_pairs(s, out_re, out_im):
    two_pi = 2.0 * math.pi
    scale = 2.0 ** -53
    for i in range(out_re.shape[0]):
        # u1 in (0, 1] keeps the log finite; u2 in [0, 1)
        u1 = (float(_next(s) >> np.uint64(11)) + 1.0) * scale
        u2 = float(_next(s) >> np.uint64(11)) * scale
        r = math.sqrt(-2.0 * math.log(u1))
        out_re[i] = r * math.cos(two_pi * u2)
        out_im[i] = r * math.sin(two_pi * u2)


class RngStream:
    """A single-owner xoshiro256** stream.

    Parameters
    ----------
    seed : int
        64-bit seed, expanded into the 256-bit state with SplitMix64.
    """

    algorithm = ALGORITHM

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        self._s = np.array(_expand_seed(self.seed), dtype=np.uint64)

    @classmethod
    def derive(cls, master_seed, stream_index):
        """Stream number ``stream_index`` under ``master_seed``."""
        mixed = splitmix64((int(master_seed) ^ splitmix64(int(stream_index) & MASK64)) & MASK64)
        return cls(mixed)

    @property
    def state(self):
        return tuple(int(v) for v in self._s)

    def next_u64(self, n=None):
        """Raw 64-bit outputs; a Python int when ``n`` is None."""
        out = np.empty(1 if n is None else int(n), dtype=np.uint64)
        _fill_u64(self._s, out)
        return int(out[0]) if n is None else out

    def skip(self, n):
        """Discard ``n`` raw outputs."""
        if n < 0:
            raise ValueError(f"cannot skip a negative count ({n})")
        _skip(self._s, int(n))

    def uniform(self, n):
        """Doubles in [0, 1) built from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def bits(self, n):
        """``n`` fair bits (top bit of each output) as uint8."""
        return (self.next_u64(n) >> np.uint64(63)).astype(np.uint8)

    def standard_normal_pairs(self, n):
        """``n`` Box-Muller pairs of independent N(0, 1) variates."""
        re = np.empty(int(n), dtype=np.float64)
        im = np.empty(int(n), dtype=np.float64)
        _fill_normal_pairs(self._s, re, im)
        return re, im

    def complex_normal(self, n):
        """``n`` i.i.d. CN(0, 1) samples (each part has variance 1/2)."""
        re, im = self.standard_normal_pairs(n)
        return (re + 1j * im) * math.sqrt(0.5)

    def skip_complex(self, n):
        """Jump over ``n`` complex normal samples."""
        self.skip(2 * int(n))

    def __repr__(self):
        return f"RngStream(seed={self.seed:#018x})"
