"""Seedable deterministic random numbers used by the randomized solvers and simulators.

The generator is SplitMix64: a 64-bit counter advanced by the golden-gamma
constant, with the output finalizer of Steele et al. It is chosen over the
standard library / numpy generators so that block choices and simulations are
reproducible bit-for-bit regardless of platform or library version.

Integer-to-range mapping: ``uniform_int(n)`` draws raw 64-bit words and
rejects any word >= floor(2^64 / n) * n, then reduces modulo n. Rejection
makes the choice exactly uniform. Floats use the top 53 bits mapped to
[0, 1).
"""

from __future__ import annotations

import math

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

# Poisson sampling switches from inversion-by-sequential-search to a
# normal-approximation-with-rejection scheme above this mean.
_POISSON_INVERSION_CAP = 30.0


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance the counter once; return (new_state, output_word)."""
    state = (state + _GAMMA) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, (z ^ (z >> 31)) & _MASK


class SplitMix64:
    """Counter-based 64-bit generator with uniform/exp/normal/Poisson draws."""

    def __init__(self, seed: int):
        self._state = int(seed) & _MASK

    def next_u64(self) -> int:
        self._state, word = splitmix64_next(self._state)
        return word

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_int(self, n: int) -> int:
        """Exactly uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) // n) * n
        while True:
            word = self.next_u64()
            if word < threshold:
                return word % n

    def exponential(self, rate: float) -> float:
        """Exponential variate with the given rate (inverse CDF)."""
        # 1 - u in (0, 1] keeps log() away from 0.
        return -math.log(1.0 - self.uniform()) / rate

    def normal(self) -> float:
        """Standard normal via Box-Muller; consumes exactly two words."""
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, mean: float) -> int:
        """Poisson variate, deterministic given the state.

        mean < 30: inversion by sequential search on the CDF.
        mean >= 30: Hormann's PTRS transformed-rejection sampler, an exact
        method built on a normal-shaped proposal with an acceptance test,
        driven by this generator's uniform stream.
        """
        if mean < 0:
            raise ValueError("mean must be nonnegative")
        if mean == 0:
            return 0
        if mean < _POISSON_INVERSION_CAP:
            return self._poisson_inversion(mean)
        return self._poisson_ptrs(mean)

    def _poisson_ptrs(self, mean: float) -> int:
        # Hormann (1993), "The transformed rejection method for generating
        # Poisson random variables", algorithm PTRS.
        log_mean = math.log(mean)
        b = 0.931 + 2.53 * math.sqrt(mean)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self.uniform() - 0.5
            v = self.uniform()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
            if us >= 0.07 and v <= v_r:
                return int(k)
            if k < 0 or (us < 0.013 and v > us):
                continue
            lhs = math.log(v * inv_alpha / (a / (us * us) + b))
            if lhs <= k * log_mean - mean - math.lgamma(k + 1.0):
                return int(k)

    def _poisson_inversion(self, mean: float) -> int:
        u = self.uniform()
        p = math.exp(-mean)
        cdf = p
        k = 0
        while u > cdf:
            k += 1
            p *= mean / k
            cdf += p
            if k > 10_000_000:  # unreachable for the means we use
                break
        return k
