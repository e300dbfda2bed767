"""Seed derivation and the deterministic per-worker generator.

Every replication r maps to a 128-bit global seed: the MD5 digest of the
decimal text of r, read big-endian. Worker i then derives its own 128-bit
seed: worker 0 uses the global seed unchanged, worker i > 0 XORs it with the
first 16 bytes of SHA-256 of the 4-byte big-endian encoding of i. Each
worker owns a 32-bit Mersenne Twister seeded from its 128-bit seed via the
standard array-seeding routine (four 32-bit words, least significant
first), so the full seed width is consumed.

Bounded draws are unbiased: rejection sampling over raw 32-bit outputs, one
logical draw per call, at least one generator word consumed. The draw
schedule of every model operation is defined in terms of these logical
draws.

The compiled helpers operate on a raw state vector (624 words plus an index
slot) so the same generator runs inside nogil kernels; the `Generator`
class wraps one state vector for Python callers.
"""

from __future__ import annotations

import hashlib

import numpy as np
from numba import njit

from .errors import ConfigurationError

SEED_BITS = 128
_MASK128 = (1 << 128) - 1

_N = 624
#: State vector length: 624 state words plus the output index.
STATE_WORDS = _N + 1


def replication_seed(replication: int) -> int:
    """128-bit global seed for a replication number (MD5 of its decimal text)."""
    if replication < 0:
        raise ConfigurationError("replication number must be >= 0")
    digest = hashlib.md5(str(replication).encode("ascii")).digest()
    return int.from_bytes(digest, "big")


def worker_seed(global_seed: int, worker: int) -> int:
    """Per-worker 128-bit seed: identity for worker 0, XOR spacing beyond."""
    if worker < 0:
        raise ConfigurationError("worker index must be >= 0")
    if not 0 <= global_seed <= _MASK128:
        raise ConfigurationError("global seed must be an unsigned 128-bit integer")
    if worker == 0:
        return global_seed
    digest = hashlib.sha256(worker.to_bytes(4, "big")).digest()
    return global_seed ^ int.from_bytes(digest[:16], "big")


def parse_seed(text: str) -> int:
    """Parse an explicit hex seed (with or without 0x prefix) to 128 bits."""
    try:
        value = int(text, 16)
    except ValueError as exc:
        raise ConfigurationError(f"not a hex seed: {text!r}") from exc
    if not 0 <= value <= _MASK128:
        raise ConfigurationError("seed exceeds 128 bits")
    return value


@njit(cache=True, nogil=True)
def _init_genrand(mt, s):
    mt[0] = np.uint32(s)
    for i in range(1, _N):
        mt[i] = np.uint32(1812433253) * (mt[i - 1] ^ (mt[i - 1] >> np.uint32(30))) + np.uint32(i)


@njit(cache=True, nogil=True)
def seed_state(state, key):
    """Initialize a state vector from an array of 32-bit key words."""
    mt = state[:_N]
    _init_genrand(mt, np.uint32(19650218))
    klen = len(key)
    i = 1
    j = 0
    k = _N if _N > klen else klen
    while k > 0:
        mt[i] = (mt[i] ^ ((mt[i - 1] ^ (mt[i - 1] >> np.uint32(30))) * np.uint32(1664525))) + key[
            j
        ] + np.uint32(j)
        i += 1
        j += 1
        if i >= _N:
            mt[0] = mt[_N - 1]
            i = 1
        if j >= klen:
            j = 0
        k -= 1
    k = _N - 1
    while k > 0:
        mt[i] = (mt[i] ^ ((mt[i - 1] ^ (mt[i - 1] >> np.uint32(30))) * np.uint32(1566083941))) - np.uint32(i)
        i += 1
        if i >= _N:
            mt[0] = mt[_N - 1]
            i = 1
        k -= 1
    mt[0] = np.uint32(0x80000000)
    state[_N] = _N  # force a twist before the first output


@njit(cache=True, nogil=True)
def next_u32(state):
    """Next raw 32-bit generator output."""
    idx = np.int64(state[_N])
    if idx >= _N:
        mt = state[:_N]
        for i in range(_N):
            y = (mt[i] & np.uint32(0x80000000)) | (mt[(i + 1) % _N] & np.uint32(0x7FFFFFFF))
            mt[i] = mt[(i + 397) % _N] ^ (y >> np.uint32(1))
            if y & np.uint32(1):
                mt[i] ^= np.uint32(0x9908B0DF)
        idx = 0
    y = state[idx]
    state[_N] = np.uint32(idx + 1)
    y ^= y >> np.uint32(11)
    y ^= (y << np.uint32(7)) & np.uint32(0x9D2C5680)
    y ^= (y << np.uint32(15)) & np.uint32(0xEFC60000)
    y ^= y >> np.uint32(18)
    return y


@njit(cache=True, nogil=True)
def uniform_below(state, n):
    """Unbiased draw in [0, n) by rejection over raw 32-bit outputs."""
    limit = np.uint32((np.uint64(1 << 32) // np.uint64(n)) * np.uint64(n))
    while True:
        w = next_u32(state)
        if limit == np.uint32(0) or w < limit:  # limit 0 means n divides 2**32
            return np.int64(w % np.uint32(n))


def seed_words(seed128: int) -> np.ndarray:
    """Split a 128-bit seed into four 32-bit words, least significant first."""
    return np.array([(seed128 >> (32 * j)) & 0xFFFFFFFF for j in range(4)], dtype=np.uint32)


def make_state(seed128: int) -> np.ndarray:
    """Allocate and seed one raw generator state vector."""
    state = np.zeros(STATE_WORDS, dtype=np.uint32)
    seed_state(state, seed_words(seed128))
    return state


class Generator:
    """A deterministic generator owned by exactly one worker.

    Thin wrapper over the raw state vector the kernels use; the same seed
    always yields the same sequence of `uniform` results.
    """

    def __init__(self, seed128: int):
        self.seed = seed128
        self.state = make_state(seed128)

    def next_word(self) -> int:
        return int(next_u32(self.state))

    def uniform(self, n: int) -> int:
        """Unbiased integer in [0, n)."""
        if n < 1:
            raise ValueError(f"uniform bound must be >= 1, got {n}")
        return int(uniform_below(self.state, n))

    def random(self) -> float:
        """Float in [0, 1) from one 32-bit word; used only for diagnostics."""
        return self.next_word() / 2**32


def for_worker(global_seed: int, worker: int) -> Generator:
    """Generator seeded for one worker of a run."""
    return Generator(worker_seed(global_seed, worker))
