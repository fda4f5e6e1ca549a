"""Deterministic random number generation.

Every random draw in this package comes from one documented generator so
that outputs can be replayed bit-exactly across runs, worker counts, and
language boundaries.

The generator is splitmix64 used in counter mode: output ``k`` (counting
from 1) of a stream seeded with ``s`` is ``mix64(s + k * GOLDEN)`` where
``mix64`` is the splitmix64 finalizer and ``GOLDEN`` is 2^64/phi. Because
each output depends only on (seed, counter), blocks of any size can be
produced vectorized and a stream can be replayed from any point. The
classic sequential splitmix64 from seed ``s`` produces exactly the same
values, so published reference vectors apply (seed 0 starts
0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, ...).

Derived quantities and their draw costs:

- ``random()`` / ``random_block(n)``: 53-bit uniforms in [0,1), one u64 each,
  via (u64 >> 11) * 2^-53.
- ``integers(bound)``: floor(random() * bound), one u64.
- ``normal_block(n)``: Box-Muller on uniform pairs. Consumes 2*ceil(n/2)
  u64 draws; pair j uses draws (2j, 2j+1) of the block as (u1, u2) and
  yields r*cos(theta), r*sin(theta) with r = sqrt(-2 ln(1-u1)),
  theta = 2 pi u2. Outputs are laid out interleaved and truncated to n.
"""

from __future__ import annotations

import math

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = 0xFFFFFFFFFFFFFFFF
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB
_INV_2_53 = 2.0 ** -53


def mix64(state: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit state into an output word."""
    z = state & MASK64
    z = ((z ^ (z >> 30)) * _MULT1) & MASK64
    z = ((z ^ (z >> 27)) * _MULT2) & MASK64
    return z ^ (z >> 31)


def derive_sample_seed(global_seed: int, sample_index: int) -> int:
    """Derive an independent per-sample stream seed.

    Returns the splitmix64 output for state
    ``global_seed + sample_index * GOLDEN``, i.e. the ``sample_index``-th
    output (0-based) of the sequential splitmix64 stream seeded with
    ``global_seed``. Distinct indices give distinct values (the state map
    is injective mod 2^64 and mix64 is a bijection).
    """
    return mix64(global_seed + (sample_index + 1) * GOLDEN)


class SplitMix64:
    """A replayable stream of splitmix64 outputs.

    Scalar and block methods draw from the same underlying sequence:
    interleaving ``next_u64()`` and ``u64_block(n)`` yields exactly the
    values a single sequential walk would.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must fit in 64 bits")
        self._seed = seed
        self._counter = 0

    @property
    def counter(self) -> int:
        """Number of u64 values consumed so far."""
        return self._counter

    def next_u64(self) -> int:
        self._counter += 1
        return mix64(self._seed + self._counter * GOLDEN)

    def u64_block(self, n: int) -> np.ndarray:
        """Next ``n`` raw outputs as a uint64 array (vectorized)."""
        if n < 0:
            raise ValueError("block size must be >= 0")
        start = self._counter + 1
        self._counter += n
        idx = np.arange(start, start + n, dtype=np.uint64)
        z = np.uint64(self._seed) + idx * np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT2)
        return z ^ (z >> np.uint64(31))

    def random(self) -> float:
        """One uniform in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def random_block(self, n: int) -> np.ndarray:
        """``n`` uniforms in [0, 1) as float64."""
        return ((self.u64_block(n) >> np.uint64(11))).astype(np.float64) * _INV_2_53

    def uniform(self, low: float, high: float) -> float:
        """One uniform in [low, high)."""
        return low + (high - low) * self.random()

    def integers(self, bound: int) -> int:
        """One integer uniform over {0, ..., bound-1}."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return int(self.random() * bound)

    def normal_block(self, n: int) -> np.ndarray:
        """``n`` standard normals via Box-Muller (see module docstring)."""
        if n == 0:
            return np.empty(0, dtype=np.float64)
        pairs = (n + 1) // 2
        u = self.random_block(2 * pairs)
        u1 = u[0::2]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]
