"""Deterministic random number generation.

The core stream is Marsaglia's lag-256 multiply-with-carry generator
(multiplier a = 809430660, base b = 2^32), which has period close to
2^8222 and passes the usual statistical batteries while needing only a
multiply, an add and two masks per 32-bit word.  State is kept in a flat
uint64 array so the numba kernels can advance it in place:

    state[0:256]   lag words Q[i] (each < 2^32)
    state[256]     carry c (< a)
    state[257]     current lag index
    state[258]     count of 32-bit words drawn so far

Seeding expands a 64-bit seed through SplitMix64.  Independent streams
for worker threads are derived by hashing, in order, the master seed,
a purpose tag and the worker index:

    h = mix64(master); h = mix64(h ^ (purpose + 1)); h = mix64(h ^ (worker + 1))

with mix64(x) = splitmix64_finalizer(x + 0x9E3779B97F4A7C15).  Purposes:
0 = bucket count allocation, 1 = node coordinate fill, 2 = edge walks.
The derivation is pure arithmetic, so any (seed, workers) pair names a
reproducible family of streams.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .errors import ParameterError

_MWC_A = np.uint64(809430660)
_LAG = 256
_I_CARRY = 256
_I_IDX = 257
_I_DRAWS = 258
_STATE_LEN = 259

_MASK32 = np.uint64(0xFFFFFFFF)
_MASK8 = np.uint64(0xFF)
_SHIFT32 = np.uint64(32)
_U64_1 = np.uint64(1)
_INV_2_32 = 1.0 / 4294967296.0

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Geometric skips are capped here; any skip this large overshoots every
# pair space the generator can address (n < 2^32 nodes).
_SKIP_CAP = np.int64(1) << np.int64(62)


def mix64(x: int) -> int:
    """One SplitMix64 step: add the golden gamma, then finalize."""
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_stream_seed(master_seed: int, purpose: int, worker: int) -> int:
    """Seed for an independent worker stream (see module docstring)."""
    h = mix64(master_seed & _MASK64)
    h = mix64(h ^ (purpose + 1))
    h = mix64(h ^ (worker + 1))
    return h


@njit(cache=True, nogil=True)
def _seed_kernel(seed, state):
    golden = np.uint64(0x9E3779B97F4A7C15)
    m1 = np.uint64(0xBF58476D1CE4E5B9)
    m2 = np.uint64(0x94D049BB133111EB)
    s = seed
    any_nonzero = False
    for i in range(_LAG + 1):
        s = s + golden
        z = s
        z = (z ^ (z >> np.uint64(30))) * m1
        z = (z ^ (z >> np.uint64(27))) * m2
        z = z ^ (z >> np.uint64(31))
        if i < _LAG:
            w = z & _MASK32
            state[i] = w
            if w != np.uint64(0):
                any_nonzero = True
        else:
            state[_I_CARRY] = z % _MWC_A
    state[_I_IDX] = np.uint64(_LAG - 1)  # first draw uses lag word 0
    state[_I_DRAWS] = np.uint64(0)
    if not any_nonzero and state[_I_CARRY] == np.uint64(0):
        state[0] = np.uint64(1)  # avoid the all-zero fixed point


def _seed_state(seed: int) -> np.ndarray:
    state = np.zeros(_STATE_LEN, dtype=np.uint64)
    _seed_kernel(np.uint64(seed & _MASK64), state)
    return state


@njit(cache=True, nogil=True)
def next_u32(state):
    """Advance the MWC stream one step and return a 32-bit word."""
    i = (state[257] + _U64_1) & _MASK8
    t = _MWC_A * state[i] + state[256]
    state[256] = t >> _SHIFT32
    v = t & _MASK32
    state[i] = v
    state[257] = i
    state[258] = state[258] + _U64_1
    return v


@njit(cache=True, nogil=True)
def next_uniform(state):
    """Uniform double in [0, 1), granularity 2^-32."""
    return next_u32(state) * _INV_2_32


@njit(cache=True, nogil=True)
def fill_uniform(state, out):
    for i in range(out.shape[0]):
        out[i] = next_u32(state) * _INV_2_32


@njit(cache=True, nogil=True)
def geometric_skip(state, log1m_p):
    """Failures before the first success, P(K=k) = (1-p)^k * p.

    Takes log(1-p) precomputed by the caller (hoisted out of hot
    loops); -inf encodes p = 1 and correctly yields 0.  Draws exactly
    one uniform except for the measure-zero redraw of u = 0.
    """
    u = next_uniform(state)
    while u <= 0.0:
        u = next_uniform(state)
    k = math.log(u) / log1m_p
    if k >= _SKIP_CAP:
        return _SKIP_CAP
    return np.int64(k)


@njit(cache=True, nogil=True)
def binomial_draw(state, n, p):
    """Exact Binomial(n, p) via waiting times between successes.

    Runs the complement when p > 1/2 so the expected number of
    geometric draws is at most n/2 + 1.
    """
    if n <= 0 or p <= 0.0:
        return np.int64(0)
    if p >= 1.0:
        return np.int64(n)
    flip = p > 0.5
    pp = 1.0 - p if flip else p
    log1m = math.log1p(-pp)
    count = np.int64(0)
    pos = np.int64(0)
    while True:
        pos += geometric_skip(state, log1m) + 1
        if pos > n:
            break
        count += 1
    if flip:
        count = n - count
    return count


@njit(cache=True, nogil=True)
def multinomial_fill(state, n, probs, out):
    """Exact Multinomial(n, probs) into out via conditional binomials.

    probs must be nonnegative and sum to 1 (validated by the caller).
    The last positive-probability cell receives the exact remainder, so
    the counts always sum to n.
    """
    nb = probs.shape[0]
    suffix = np.empty(nb, dtype=np.float64)
    acc = 0.0
    for i in range(nb - 1, -1, -1):
        acc += probs[i]
        suffix[i] = acc
    last = -1
    for i in range(nb):
        if probs[i] > 0.0:
            last = i
    remaining = n
    for i in range(nb):
        if remaining <= 0 or i > last:
            out[i] = 0
        elif i == last:
            out[i] = remaining
            remaining = 0
        else:
            pc = probs[i] / suffix[i]
            if pc > 1.0:
                pc = 1.0
            c = binomial_draw(state, remaining, pc)
            out[i] = c
            remaining -= c


class RngState:
    """One multiply-with-carry stream.

    Instances are cheap to create and are never shared between threads;
    parallel code derives one per worker with :meth:`for_worker`.
    """

    __slots__ = ("seed", "state")

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.state = _seed_state(self.seed)

    @classmethod
    def for_worker(cls, master_seed: int, purpose: int, worker: int) -> "RngState":
        return cls(derive_stream_seed(master_seed, purpose, worker))

    @property
    def draws(self) -> int:
        """Number of 32-bit words consumed so far."""
        return int(self.state[_I_DRAWS])

    def next_uniform(self) -> float:
        return float(next_uniform(self.state))

    def uniforms(self, count: int) -> np.ndarray:
        out = np.empty(int(count), dtype=np.float64)
        fill_uniform(self.state, out)
        return out

    def geometric_skip(self, p: float) -> int:
        if not 0.0 < p <= 1.0:
            raise ParameterError(f"geometric skip needs 0 < p <= 1, got {p}")
        log1m = -math.inf if p >= 1.0 else math.log1p(-p)
        return int(geometric_skip(self.state, log1m))

    def binomial(self, n: int, p: float) -> int:
        if n < 0:
            raise ParameterError(f"binomial needs n >= 0, got {n}")
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"binomial needs 0 <= p <= 1, got {p}")
        return int(binomial_draw(self.state, np.int64(n), float(p)))

    def multinomial(self, n: int, probs: np.ndarray) -> np.ndarray:
        if n < 0:
            raise ParameterError(f"multinomial needs n >= 0, got {n}")
        probs = np.ascontiguousarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ParameterError("multinomial needs a nonempty 1-d probability vector")
        if np.any(probs < 0.0):
            raise ParameterError("multinomial probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"multinomial probabilities sum to {total!r}, not 1")
        out = np.empty(probs.size, dtype=np.int64)
        multinomial_fill(self.state, np.int64(n), probs, out)
        return out
