"""Portable seeded PRNG.

PCG-XSH-RR 64/32 ("pcg32"): 64-bit LCG state, 32-bit output via
xorshift-high + random rotation. The generator is implemented here rather
than taken from a library so the stream is pinned to one published
algorithm and reproduces bit-for-bit on any host or language.

Reference update, seeding, and bounded-draw procedures follow the
canonical pcg32 C implementation:

    state' = state * 6364136223846793005 + inc      (mod 2^64)
    xorshifted = ((state >> 18) ^ state) >> 27      (32-bit)
    rot = state >> 59
    out = (xorshifted >> rot) | (xorshifted << (-rot & 31))

where the output is computed from the state *before* the update. Floats
use the standard 53-bit construction (u64 >> 11) * 2^-53; normals are
Box-Muller pairs; shuffles are Fisher-Yates with rejection-sampled
bounded draws. Array draws advance the state exactly as the equivalent
sequence of scalar draws would.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005
# Stream selector of the canonical PCG32_INITIALIZER.
_DEFAULT_STREAM = 0xDA3E39CB94B95BDB

_INV_2_53 = 2.0**-53


class Pcg32:
    """Deterministic pcg32 stream seeded from a 64-bit integer."""

    __slots__ = ("_state", "_inc")

    def __init__(self, seed: int, stream: int = _DEFAULT_STREAM):
        self._inc = ((stream << 1) | 1) & _MASK64
        self._state = 0
        self.next_u32()
        self._state = (self._state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def next_u64(self) -> int:
        hi = self.next_u32()
        lo = self.next_u32()
        return (hi << 32) | lo

    def uniform(self) -> float:
        """Float64 in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def bounded(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection, as in pcg32_boundedrand_r."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (1 << 32) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def next_u32_array(self, n: int) -> np.ndarray:
        """Draw n consecutive outputs, identical to n scalar next_u32 calls.

        The LCG is vectorized through the closed form
        state_k = a^k * state_0 + inc * (a^(k-1) + ... + a + 1), with all
        arithmetic wrapping mod 2^64 (uint64 overflow semantics).
        """
        if n < 0:
            raise ValueError("n must be non-negative")
        if n == 0:
            return np.empty(0, dtype=np.uint32)
        a = np.uint64(_MULT)
        powers = np.empty(n + 1, dtype=np.uint64)
        powers[0] = np.uint64(1)
        if n >= 1:
            np.cumprod(np.full(n, a, dtype=np.uint64), out=powers[1:])
        geo = np.cumsum(powers[:n], dtype=np.uint64)  # 1, 1+a, 1+a+a^2, ...
        states = np.empty(n, dtype=np.uint64)
        states[0] = np.uint64(self._state)
        if n > 1:
            states[1:] = powers[1:n] * np.uint64(self._state) + np.uint64(self._inc) * geo[: n - 1]
        final_state = (int(powers[n]) * self._state + self._inc * int(geo[n - 1])) & _MASK64
        xorshifted = (((states >> np.uint64(18)) ^ states) >> np.uint64(27)).astype(np.uint32)
        rot = (states >> np.uint64(59)).astype(np.uint32)
        out = (xorshifted >> rot) | (xorshifted << ((np.uint32(32) - rot) & np.uint32(31)))
        self._state = final_state
        return out

    def uniform_array(self, n: int) -> np.ndarray:
        """n float64 uniforms in [0, 1), same stream as n scalar uniform() calls."""
        words = self.next_u32_array(2 * n).astype(np.uint64)
        u64 = (words[0::2] << np.uint64(32)) | words[1::2]
        return (u64 >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal_array(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller over consecutive uniform pairs.

        Pair (u1, u2) yields r*cos(2*pi*u2) and r*sin(2*pi*u2) with
        r = sqrt(-2*ln(1 - u1)); outputs are interleaved and truncated
        to n, consuming ceil(n/2) pairs from the stream.
        """
        if n == 0:
            return np.empty(0, dtype=np.float64)
        m = (n + 1) // 2
        u = self.uniform_array(2 * m)
        u1 = u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates using bounded draws from this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def spawn(self) -> "Pcg32":
        """Child stream seeded from the next u64 of this stream.

        Stages derive sub-streams (init, shuffle, ...) in a documented
        order so no two consumers share a stream.
        """
        return Pcg32(self.next_u64())

    @property
    def state(self) -> tuple[int, int]:
        return (self._state, self._inc)
