import random

import pytest

from primework.chains import ChainKind, FixedLength, evaluate_chain
from primework.consensus import Block, RetargetConfig, validate_block
from primework.miner import (
    BlockTemplate,
    MinerConfig,
    evaluate_candidates,
    mine_block,
    sieve_candidates,
)
from primework.primality import sieve_small_primes


class TestSieve:
    def test_no_primes_keeps_everything(self):
        mask = sieve_candidates(12345, 1, 101, ChainKind.CC1, 3, [])
        assert all(mask)

    def test_three_clears_divisible_minus_arm(self):
        # hash_int 4: element 4m - 1; divisible by 3 when m = 1 (mod 3),
        # but m=1 gives element 3 = p itself and must survive
        mask = sieve_candidates(4, 1, 20, ChainKind.CC1, 1, [3])
        for idx, m in enumerate(range(1, 20)):
            element = 4 * m - 1
            expected = not (element % 3 == 0 and element != 3)
            assert bool(mask[idx]) == expected, m

    @pytest.mark.parametrize("kind", list(ChainKind))
    def test_soundness_against_full_evaluation(self, kind):
        # surviving bits must cover every multiplier reaching the depth
        rng = random.Random(17)
        hash_int = rng.getrandbits(64) | (1 << 63)
        hash_int += hash_int % 2  # even base so all origins are even
        depth = 2
        primes = sieve_small_primes(1000)
        lo, hi = 1, 10_001
        mask = sieve_candidates(hash_int, lo, hi, kind, depth, primes)
        for idx in range(hi - lo):
            if mask[idx]:
                continue
            origin = hash_int * (lo + idx)
            assert evaluate_chain(kind, origin).integer < depth, lo + idx

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            sieve_candidates(4, 5, 5, ChainKind.CC1, 1, [])
        with pytest.raises(ValueError):
            sieve_candidates(4, 0, 5, ChainKind.CC1, 1, [])
        with pytest.raises(ValueError):
            sieve_candidates(4, 1, 5, ChainKind.CC1, 0, [])

    def test_twin_mask_is_intersection(self):
        primes = sieve_small_primes(100)
        h = 9902
        minus = sieve_candidates(h, 1, 500, ChainKind.CC1, 2, primes)
        plus = sieve_candidates(h, 1, 500, ChainKind.CC2, 2, primes)
        twin = sieve_candidates(h, 1, 500, ChainKind.BITWIN, 2, primes)
        assert twin == bytearray(a & b for a, b in zip(minus, plus))


class TestMining:
    def test_mined_block_validates(self, mined_block, genesis, retarget_config):
        assert validate_block(mined_block, genesis.header, retarget_config).valid

    def test_deterministic_with_fixed_seed(self, genesis):
        template = BlockTemplate(
            parent=genesis.header,
            payload=b"determinism",
            target=FixedLength.from_float(2.0),
            timestamp=1,
        )
        first = mine_block(template, MinerConfig(seed=5))
        second = mine_block(template, MinerConfig(seed=5))
        assert first is not None
        assert first == second

    def test_zero_budget_exhausts(self, genesis):
        template = BlockTemplate(
            parent=genesis.header,
            payload=b"",
            target=FixedLength.from_float(2.0),
            timestamp=1,
        )
        assert mine_block(template, MinerConfig(max_batches=0)) is None

    def test_soundness_over_many_blocks(self, genesis, retarget_config):
        targets = [2.0, 2.25, 2.5, 2.75, 3.0]
        count = 0
        for i in range(50):
            target = FixedLength.from_float(targets[i % len(targets)])
            payload = f"soundness-{i}".encode()
            template = BlockTemplate(
                parent=genesis.header, payload=payload, target=target, timestamp=1 + i
            )
            header = mine_block(template, MinerConfig(seed=1000 + i))
            assert header is not None, i
            verdict = validate_block(
                Block(header=header, payload=payload), genesis.header, retarget_config
            )
            assert verdict.valid, (i, verdict.reason)
            count += 1
        assert count == 50

    def test_multi_worker_returns_valid_block(self, genesis, retarget_config):
        template = BlockTemplate(
            parent=genesis.header,
            payload=b"parallel",
            target=FixedLength.from_float(2.0),
            timestamp=1,
        )
        header = mine_block(template, MinerConfig(worker_count=2, seed=3))
        assert header is not None
        verdict = validate_block(
            Block(header=header, payload=b"parallel"), genesis.header, retarget_config
        )
        assert verdict.valid


class TestEvaluateCandidates:
    def test_counts_qualifying_multipliers(self):
        # origin 6 yields chains of length >= 2 for every kind
        hits = evaluate_candidates(6, [1], FixedLength.from_float(2.0).raw)
        assert hits == 1

    def test_skips_odd_origins(self):
        assert evaluate_candidates(3, [1, 3], FixedLength.from_float(1.0).raw) == 0
