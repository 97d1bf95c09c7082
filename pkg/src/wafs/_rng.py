"""Portable, documented pseudo-random streams.

Every random draw in the package goes through :class:`SplitMix64` so that
results are reproducible bit-for-bit and can be re-derived by any other
implementation from the description below.

Algorithm
---------
The generator is the counter form of SplitMix64.  With 64-bit unsigned
wrap-around arithmetic, the k-th output (k = 1, 2, ...) of a stream with
seed ``s`` is ``mix(s + k * 0x9E3779B97F4A7C15)`` where::

    mix(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

Derived values:

* uniform in [0, 1): ``(u >> 11) * 2**-53``
* standard normal: Box-Muller on consecutive uniform pairs ``(u1, u2)``,
  ``r = sqrt(-2 ln(1 - u1))``, emitting ``r cos(2 pi u2)`` then
  ``r sin(2 pi u2)``
* permutation of ``n`` items: Fisher-Yates from the last index down,
  swapping ``i`` with ``floor(u * (i + 1))``
* named sub-stream: seed ``mix(s ^ fnv1a64(name))``
"""
from __future__ import annotations

import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, name: str) -> int:
    """Seed of the sub-stream ``name`` of ``seed``."""
    z = np.array([(int(seed) & _MASK64) ^ fnv1a64(name)], dtype=np.uint64)
    return int(_mix(z)[0])


class SplitMix64:
    """Counter-based SplitMix64 stream (see module docstring)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._counter = 0

    def substream(self, name: str) -> "SplitMix64":
        return SplitMix64(derive_seed(self.seed, name))

    def uint64(self, n: int) -> np.ndarray:
        k = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix(np.uint64(self.seed) + k * GOLDEN_GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.column_stack([r * np.cos(theta), r * np.sin(theta)]).ravel()
        return z[:n]

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniform(n - 1)
        for pos, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[pos] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
