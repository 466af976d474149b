"""Deterministic, splittable random streams.

Generator: xoshiro256** (Blackman & Vigna), 256-bit state, period 2**256 - 1.

Seeding: a stream is keyed by ``(seed, stream_id)``.  The key is folded into
one 64-bit word with the splitmix64 finalizer,

    key = mix(mix(seed + GOLDEN) ^ (stream_id + GOLDEN * 2))

and the four state words are the next four outputs of a splitmix64 sequence
started at ``key``.  splitmix64 never yields four consecutive zeros, but the
all-zero state is still checked and replaced.

Raw draw accounting (what the simulator relies on for reproducibility):

* ``next_u64``          one draw
* ``random``            one draw, top 53 bits scaled to [0, 1)
* ``bernoulli(p)``      one draw, ``random() < p``
* ``uniform_index(n)``  zero draws when ``n == 1``; otherwise bitmask
                        rejection on the top ``ceil(log2 n)`` bits, so one
                        draw per attempt (exactly one when n is a power of 2)
"""

from __future__ import annotations

import numba as nb
import numpy as np

__all__ = ["RngStream", "derive"]

MASK64 = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_GOLDEN2 = np.uint64((0x9E3779B97F4A7C15 * 2) & MASK64)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_FIVE = np.uint64(5)
_NINE = np.uint64(9)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(nb.uint64(nb.uint64), cache=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def seed_state(seed, stream_id, out):
    key = mix64(mix64(seed + GOLDEN) ^ (stream_id + _GOLDEN2))
    for i in range(4):
        key = key + GOLDEN
        out[i] = mix64(key)
    if out[0] == 0 and out[1] == 0 and out[2] == 0 and out[3] == 0:
        out[0] = GOLDEN


@nb.njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _FIVE, 7) * _NINE
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def next_double(s):
    return np.float64(next_u64(s) >> np.uint64(11)) * _INV53


@nb.njit(cache=True)
def bernoulli(s, prob):
    return next_double(s) < prob


@nb.njit(cache=True)
def index_bits(n):
    """Number of top bits needed to cover ``range(n)``; 0 for n == 1."""
    bits = 0
    while (1 << bits) < n:
        bits += 1
    return bits


@nb.njit(cache=True)
def uniform_index(s, n):
    if n <= 1:
        return 0
    shift = np.uint64(64 - index_bits(n))
    bound = np.uint64(n)
    while True:
        r = next_u64(s) >> shift
        if r < bound:
            return np.int64(r)


@nb.njit(cache=True)
def _fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = next_u64(s)


@nb.njit(cache=True)
def _fill_double(s, out):
    for i in range(out.shape[0]):
        out[i] = next_double(s)


@nb.njit(cache=True)
def _fill_index(s, n, out):
    for i in range(out.shape[0]):
        out[i] = uniform_index(s, n)


@nb.njit(cache=True)
def _fill_bernoulli(s, prob, out):
    for i in range(out.shape[0]):
        out[i] = bernoulli(s, prob)


class RngStream:
    """A xoshiro256** stream identified by ``(seed, stream_id)``.

    The mutable state lives in ``state`` (four ``uint64`` words) so compiled
    kernels can advance it in place.
    """

    __slots__ = ("seed", "stream_id", "state")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = _as_u64(seed, "seed")
        self.stream_id = _as_u64(stream_id, "stream_id")
        self.state = np.empty(4, dtype=np.uint64)
        seed_state(np.uint64(self.seed), np.uint64(self.stream_id), self.state)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def copy(self) -> "RngStream":
        other = RngStream.__new__(RngStream)
        other.seed = self.seed
        other.stream_id = self.stream_id
        other.state = self.state.copy()
        return other

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def random(self, size: int | None = None):
        if size is None:
            return float(next_double(self.state))
        out = np.empty(size, dtype=np.float64)
        _fill_double(self.state, out)
        return out

    def u64(self, size: int) -> np.ndarray:
        out = np.empty(size, dtype=np.uint64)
        _fill_u64(self.state, out)
        return out

    def uniform_index(self, n: int, size: int | None = None):
        """Unbiased integer in ``[0, n)`` (no modulo bias)."""
        n = int(n)
        if n < 1:
            raise ValueError(f"uniform_index needs n >= 1, got {n}")
        if size is None:
            return int(uniform_index(self.state, n))
        out = np.empty(size, dtype=np.int64)
        _fill_index(self.state, n, out)
        return out

    def bernoulli(self, prob: float, size: int | None = None):
        prob = float(prob)
        if not 0.0 <= prob <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {prob}")
        if size is None:
            return bool(bernoulli(self.state, prob))
        out = np.empty(size, dtype=np.bool_)
        _fill_bernoulli(self.state, prob, out)
        return out


def _as_u64(value: int, name: str) -> int:
    value = int(value)
    if not 0 <= value <= MASK64:
        raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
    return value


def derive(seed: int, stream_id: int = 0) -> RngStream:
    """Return the stream for ``(seed, stream_id)``; pure and thread-safe."""
    return RngStream(seed, stream_id)
