"""Counter-based deterministic random streams.

Every stochastic draw in the package flows through a :class:`RandomStream`
keyed by a ``(seed, purpose_tag)`` pair.  The generator is a pure function of
``(key, counter)``: the i-th output is a 64-bit avalanche mix of the key plus
an odd increment, so streams support random access, never share state, and
reproduce bit-for-bit across processes and platforms.  Distinct purpose tags
give statistically independent streams for the same seed, which is what lets
a reward-randomization wrapper draw its multipliers without perturbing the
initial-state draws of the environment it wraps.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

# Purpose tags. Environment-side draws use 0-7; agent-side draws use 16+ so a
# master seed that happens to equal an episode seed can never alias a stream.
INIT_STATE = 0
GOAL = 1
REWARD_RAND = 2
IMAGE_PICK = 3
LABEL_NOISE = 4
OBS_NOISE = 5

PARAM_INIT = 16
ACTION = 17
REPLAY = 18
SHUFFLE = 19
BASELINE = 20


def _mix(z: int) -> int:
    """SplitMix64 finalizer over Python ints (explicit 64-bit wraparound)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_A)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_B)
    z ^= z >> np.uint64(31)
    return z


def _derive_key(seed: int, tag: int) -> int:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if tag < 0:
        raise ValueError(f"purpose tag must be non-negative, got {tag}")
    return _mix(_mix(seed) ^ ((_GOLDEN * (tag + 1)) & _MASK))


class RandomStream:
    """Deterministic stream of draws for one ``(seed, purpose_tag)`` pair.

    The stream owns only an integer counter; copying the object or
    re-creating it from the same key pair replays the identical sequence.
    """

    __slots__ = ("_key", "_counter", "seed", "tag")

    def __init__(self, seed: int, tag: int):
        self.seed = int(seed)
        self.tag = int(tag)
        self._key = _derive_key(self.seed, self.tag)
        self._counter = 0

    def u64(self) -> int:
        self._counter += 1
        return _mix((self._key + _GOLDEN * self._counter) & _MASK)

    def _u64_block(self, n: int) -> np.ndarray:
        counters = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        return _mix_array(np.uint64(self._key) + np.uint64(_GOLDEN) * counters)

    def unit(self) -> float:
        """Uniform draw in [0, 1) with 53 random bits."""
        return (self.u64() >> 11) * 2.0**-53

    def uniform(self, a: float, b: float) -> float:
        """Uniform draw in [a, b]; a == b returns a exactly."""
        if a > b:
            raise ValueError(f"uniform bounds out of order: a={a} > b={b}")
        return a + (b - a) * self.unit()

    def gaussian(self, mean: float, var: float) -> float:
        """Gaussian draw via Box-Muller on two uniforms; var == 0 is exact."""
        if var < 0:
            raise ValueError(f"variance must be non-negative, got {var}")
        if var == 0.0:
            return mean
        # u1 in (0, 1] so log never sees zero; consumes exactly two draws.
        u1 = ((self.u64() >> 11) + 1) * 2.0**-53
        u2 = (self.u64() >> 11) * 2.0**-53
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + math.sqrt(var) * z

    def integer(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is ~n/2^64, negligible here."""
        if n <= 0:
            raise ValueError(f"integer upper bound must be positive, got {n}")
        return self.u64() % n

    def uniform_vec(self, a: float, b: float, n: int) -> np.ndarray:
        if a > b:
            raise ValueError(f"uniform bounds out of order: a={a} > b={b}")
        units = (self._u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return a + (b - a) * units

    def gaussian_vec(self, mean: float, var: float, n: int) -> np.ndarray:
        if var < 0:
            raise ValueError(f"variance must be non-negative, got {var}")
        if var == 0.0:
            return np.full(n, float(mean))
        # same (u1, u2) pairing as the scalar path: consecutive counter values
        block = self._u64_block(2 * n) >> np.uint64(11)
        u1 = (block[0::2].astype(np.float64) + 1.0) * 2.0**-53
        u2 = block[1::2].astype(np.float64) * 2.0**-53
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return mean + math.sqrt(var) * z

    def index_vec(self, n: int, count: int) -> np.ndarray:
        """`count` uniform indices into [0, n)."""
        if n <= 0:
            raise ValueError(f"index upper bound must be positive, got {n}")
        return (self._u64_block(count) % np.uint64(n)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n) driven by this stream."""
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.integer(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def rng_stream(seed: int, purpose_tag: int) -> RandomStream:
    """Open the deterministic stream for a ``(seed, purpose_tag)`` pair."""
    return RandomStream(seed, purpose_tag)
