"""Deterministic, platform-independent random numbers.

Substreams are produced by seeding a xoshiro256** state from a SplitMix64
walk keyed by (seed, stream index), so replication i of an experiment can
draw from rng_substream(seed, i) independently of every other replication.
Normal deviates use Box-Muller (no rejection step), which keeps the deviate
count consumed per request fixed and reproducible everywhere.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)


def _splitmix_walk(state, count):
    """SplitMix64: count outputs starting from the given state."""
    out = []
    for _ in range(count):
        state = (state + _GOLDEN) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out, state


class RngState:
    """A xoshiro256** stream identified by (seed, stream).

    The same (seed, stream) always reproduces the same deviate sequence;
    all arithmetic is explicit 64-bit integer work, so the sequence does
    not depend on the platform or on any library's generator internals.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK
        self.stream = int(stream)
        start = (self.seed + (self.stream & _MASK) * _GOLDEN) & _MASK
        words, _ = _splitmix_walk(start, 4)
        if not any(words):
            words[0] = _GOLDEN
        self._s = tuple(words)
        self._spare_normal = None

    def _raw(self, count: int) -> np.ndarray:
        """count raw 64-bit outputs of xoshiro256**."""
        s0, s1, s2, s3 = self._s
        out = []
        append = out.append
        for _ in range(count):
            x = (s1 * 5) & _MASK
            append((((x << 7) | (x >> 57)) & _MASK) * 9 & _MASK)
            t = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        self._s = (s0, s1, s2, s3)
        return np.array(out, dtype=np.uint64)

    def uniforms(self, count: int) -> np.ndarray:
        """count uniforms in [0, 1) from the top 53 bits of each output."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        return np.asarray(self._raw(count) >> np.uint64(11), dtype=float) / _TWO53

    def normals(self, count: int) -> np.ndarray:
        """count standard normal deviates via Box-Muller pairs.

        An odd request caches the unused half of the last pair for the
        next call, so total raw consumption stays deterministic.
        """
        if count < 0:
            raise ValueError("count must be nonnegative")
        out = np.empty(count)
        have = 0
        if self._spare_normal is not None and count > 0:
            out[0] = self._spare_normal
            self._spare_normal = None
            have = 1
        need = count - have
        if need > 0:
            pairs = (need + 1) // 2
            # u1 in (0, 1] keeps the log finite.
            raw = self._raw(2 * pairs) >> np.uint64(11)
            u1 = (np.asarray(raw[:pairs], dtype=float) + 1.0) / _TWO53
            u2 = np.asarray(raw[pairs:], dtype=float) / _TWO53
            r = np.sqrt(-2.0 * np.log(u1))
            ang = 2.0 * np.pi * u2
            z = np.empty(2 * pairs)
            z[0::2] = r * np.cos(ang)
            z[1::2] = r * np.sin(ang)
            out[have:] = z[:need]
            if 2 * pairs > need:
                self._spare_normal = float(z[need])
        return out

    def permutation(self, count: int) -> np.ndarray:
        """A uniformly random permutation of range(count)."""
        return np.argsort(self.uniforms(count), kind="stable")

    def __repr__(self):
        return f"RngState(seed={self.seed}, stream={self.stream})"


def rng_substream(seed: int, index: int) -> RngState:
    """The index-th reproducible substream of a master seed."""
    return RngState(seed, index)
