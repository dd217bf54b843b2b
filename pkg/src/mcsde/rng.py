"""Counter-based deterministic random numbers.

Every variate is a pure function of (seed, *key words): there is no mutable
stream state, so work can be split across threads or processes in any order
without changing a single bit of the output.  The mixer is the splitmix64
finalizer, applied after absorbing each key word.

All functions accept scalars or numpy integer arrays for the key words and
broadcast like ufuncs.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = np.float64(1.0 / (1 << 53))


def _finalize(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def _to_u64(w) -> np.ndarray:
    """Reinterpret integers (possibly negative) as uint64 key words."""
    arr = np.asarray(w)
    if arr.dtype == np.uint64:
        return arr
    return arr.astype(np.int64).view(np.uint64)


def hash_words(seed: int, *words) -> np.ndarray:
    """Mix a seed and any number of integer key words into 64 uniform bits."""
    with np.errstate(over="ignore"):
        h = _finalize(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) * _GOLDEN + _GOLDEN)
        for w in words:
            h = _finalize((h ^ _to_u64(w)) * _GOLDEN + _GOLDEN)
    return h


def uniform01(seed: int, *words) -> np.ndarray:
    """Uniform double in [0, 1) keyed by (seed, *words)."""
    return np.asarray((hash_words(seed, *words) >> np.uint64(11)).astype(np.float64) * _U53)


def normal(seed: int, *words) -> np.ndarray:
    """Standard normal keyed by (seed, *words), via Box-Muller.

    Two sub-draws are derived from the key by appending word indices, so a
    single key yields a single independent Gaussian.
    """
    u1 = uniform01(seed, *words, 0)
    u2 = uniform01(seed, *words, 1)
    # guard log(0); 1 - u keeps the argument in (0, 1]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return np.asarray(r * np.cos(2.0 * np.pi * u2))


class CounterRng:
    """Thin convenience wrapper binding a seed.

    The object is immutable; ``u01`` and ``normal`` are pure functions of the
    key words, matching the package-wide reproducibility contract.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed)

    def u01(self, *words) -> np.ndarray:
        return uniform01(self.seed, *words)

    def normal(self, *words) -> np.ndarray:
        return normal(self.seed, *words)

    def derive(self, word: int) -> "CounterRng":
        """Independent child generator (e.g., one per subsystem)."""
        return CounterRng(int(hash_words(self.seed, word)))
