"""Seed derivation and generator contract tests."""

import hashlib
import random

import numpy as np
import pytest

from predprey import Generator, replication_seed, worker_seed
from predprey.rng import for_worker, make_state, parse_seed, seed_words, uniform_below


class TestReplicationSeed:
    def test_replication_one_is_md5_digest(self):
        # md5("1") read big-endian; the digest is exactly 128 bits
        assert replication_seed(1) == 0xC4CA4238A0B923820DCC509A6F75849B

    def test_matches_hashlib_for_any_replication(self):
        for r in (0, 1, 2, 7, 1234, 10**9):
            expect = int.from_bytes(hashlib.md5(str(r).encode()).digest(), "big")
            assert replication_seed(r) == expect

    def test_deterministic(self):
        assert replication_seed(42) == replication_seed(42)

    def test_distinct_replications_distinct_seeds(self):
        seeds = {replication_seed(r) for r in range(200)}
        assert len(seeds) == 200

    def test_negative_replication_rejected(self):
        from predprey import ConfigurationError

        with pytest.raises(ConfigurationError):
            replication_seed(-1)


class TestWorkerSeed:
    def test_worker_zero_is_identity(self):
        s = replication_seed(5)
        assert worker_seed(s, 0) == s

    def test_worker_spacing_from_zero_seed(self):
        # with S = 0 the spacing term is exposed directly
        expect = int.from_bytes(hashlib.sha256(b"\x00\x00\x00\x01").digest()[:16], "big")
        assert worker_seed(0, 1) == expect

    @pytest.mark.parametrize("worker", [1, 2, 3, 8, 100])
    def test_xor_involution(self, worker):
        # applying the spacing twice restores the global seed
        s = replication_seed(3)
        assert worker_seed(worker_seed(s, worker), worker) == s

    def test_distinct_workers_distinct_seeds(self):
        s = replication_seed(1)
        seeds = {worker_seed(s, w) for w in range(64)}
        assert len(seeds) == 64


class TestParseSeed:
    def test_accepts_prefixed_and_bare_hex(self):
        assert parse_seed("0xdeadbeef") == 0xDEADBEEF
        assert parse_seed("DEADBEEF") == 0xDEADBEEF

    def test_rejects_garbage_and_overwide(self):
        from predprey import ConfigurationError

        with pytest.raises(ConfigurationError):
            parse_seed("not-a-seed")
        with pytest.raises(ConfigurationError):
            parse_seed("f" * 33)


class TestGenerator:
    def test_matches_cpython_mersenne_twister(self):
        # CPython seeds its generator with the same array-seeding routine
        # over least-significant-first 32-bit words, so any 128-bit seed
        # with a nonzero top word cross-checks our core exactly
        seed = replication_seed(1)
        ref = random.Random(seed)
        gen = Generator(seed)
        assert [gen.next_word() for _ in range(2000)] == [ref.getrandbits(32) for _ in range(2000)]

    def test_canonical_array_seeding_vector(self):
        # first output of the reference implementation seeded with the
        # canonical key {0x123, 0x234, 0x345, 0x456}
        seed = 0x123 | (0x234 << 32) | (0x345 << 64) | (0x456 << 96)
        assert Generator(seed).next_word() == 1067595299

    def test_same_seed_same_sequence(self):
        a = Generator(0xABCDEF)
        b = Generator(0xABCDEF)
        assert [a.uniform(37) for _ in range(500)] == [b.uniform(37) for _ in range(500)]

    def test_golden_first_draws(self):
        # frozen regression fixture: first bounded draws under md5("1")
        gen = Generator(replication_seed(1))
        assert [gen.uniform(100) for _ in range(3)] == [17, 30, 92]
        raw = Generator(replication_seed(1))
        assert [raw.next_word() for _ in range(5)] == [
            1056953417, 2702618630, 3165575292, 2359841673, 2501658727,
        ]

    def test_uniform_singleton(self):
        gen = Generator(9)
        assert all(gen.uniform(1) == 0 for _ in range(20))

    def test_uniform_bound_validation(self):
        gen = Generator(9)
        with pytest.raises(ValueError):
            gen.uniform(0)

    def test_uniform_range(self):
        gen = Generator(11)
        draws = [gen.uniform(7) for _ in range(2000)]
        assert min(draws) == 0 and max(draws) == 6

    def test_uniform_frequencies_within_three_sigma(self):
        # 10^6 draws of uniform(5): each bucket within 3 sigma of n/5
        n = 1_000_000
        state = make_state(replication_seed(1))
        counts = np.zeros(5, dtype=np.int64)
        for _ in range(n):
            counts[uniform_below(state, 5)] += 1
        expect = n / 5
        sigma = (n * 0.2 * 0.8) ** 0.5
        assert np.all(np.abs(counts - expect) < 3 * sigma), counts

    def test_rejection_bound_is_exact_for_powers_of_two(self):
        gen = Generator(3)
        draws = [gen.uniform(2) for _ in range(1000)]
        assert set(draws) == {0, 1}

    def test_seed_words_little_endian_order(self):
        words = seed_words(0x000000040000000300000002_00000001)
        assert list(words) == [1, 2, 3, 4]


class TestSubstreamIndependence:
    def test_pairwise_correlation_below_threshold(self):
        s = replication_seed(1)
        n = 100_000
        streams = []
        for w in range(8):
            gen = for_worker(s, w)
            state = gen.state
            streams.append(np.array([uniform_below(state, 1 << 30) for _ in range(n)],
                                    dtype=np.float64) / (1 << 30))
        for i in range(8):
            for j in range(i + 1, 8):
                corr = np.corrcoef(streams[i], streams[j])[0, 1]
                assert abs(corr) < 0.01, (i, j, corr)
