"""Empirical checks of the mathematical claims behind the proof scheme.

Everything here measures rather than assumes: exact prime counts against
the x/ln x estimate, chain frequency decay with origin size and depth,
the mine/verify cost asymmetry, search throughput across worker counts,
and the sensitivity of a proof to single-bit changes in its binding hash.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .chains import ChainKind, FixedLength, evaluate_chain
from .consensus import (
    BindingMode,
    Block,
    BlockHeader,
    RetargetConfig,
    genesis_block,
    validate_block,
    validate_pow,
)
from .miner import BlockTemplate, MinerConfig, evaluate_candidates, mine_block, sieve_candidates
from .primality import sieve_small_primes

MAX_COUNT_LIMIT = 10**8
_SEGMENT = 1 << 20


def prime_counting(x: int) -> int:
    """Exact count of primes <= x by a segmented sieve."""
    if x < 2 or x > MAX_COUNT_LIMIT:
        raise ValueError(f"x must be in [2, {MAX_COUNT_LIMIT}], got {x}")
    base = sieve_small_primes(math.isqrt(x)) if x >= 4 else []
    count = 0
    lo = 2
    while lo <= x:
        hi = min(lo + _SEGMENT - 1, x)
        flags = bytearray(b"\x01") * (hi - lo + 1)
        for p in base:
            start = max(p * p, ((lo + p - 1) // p) * p)
            if start > hi:
                continue
            flags[start - lo :: p] = b"\x00" * ((hi - start) // p + 1)
        count += sum(flags)
        lo = hi + 1
    return count


@dataclass(frozen=True)
class DensityReport:
    """Exact prime count next to the x/ln x estimate."""

    x: int
    pi_x: int
    pnt_estimate: float
    ratio: float

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "pi_x": self.pi_x,
            "pnt_estimate": self.pnt_estimate,
            "ratio": self.ratio,
        }


def pnt_ratio(x: int) -> DensityReport:
    """How far the exact count sits above the x/ln x estimate."""
    if x < 10:
        raise ValueError(f"x must be >= 10, got {x}")
    pi_x = prime_counting(x)
    estimate = x / math.log(x)
    return DensityReport(x=x, pi_x=pi_x, pnt_estimate=estimate, ratio=pi_x / estimate)


@dataclass(frozen=True)
class ChainFrequencyReport:
    bits: int
    depth: int
    samples: int
    hits: int
    frequency: float
    kind: ChainKind

    def to_dict(self) -> dict:
        return {
            "bits": self.bits,
            "depth": self.depth,
            "samples": self.samples,
            "hits": self.hits,
            "frequency": self.frequency,
            "kind": self.kind.name,
        }


def chain_frequency(
    bits: int,
    depth: int,
    samples: int,
    seed: int,
    kind: ChainKind = ChainKind.CC1,
) -> ChainFrequencyReport:
    """Fraction of random even origins of a given size reaching `depth`."""
    if not 16 <= bits <= 256:
        raise ValueError("bits must be in [16, 256]")
    if depth not in (1, 2, 3):
        raise ValueError("depth must be 1, 2 or 3")
    if samples < 10**3:
        raise ValueError("samples must be >= 1000")
    rng = random.Random(seed)
    hits = 0
    for _ in range(samples):
        origin = rng.getrandbits(bits - 1) | (1 << (bits - 1))
        origin -= origin & 1
        if evaluate_chain(kind, origin).integer >= depth:
            hits += 1
    return ChainFrequencyReport(
        bits=bits, depth=depth, samples=samples, hits=hits, frequency=hits / samples, kind=kind
    )


@dataclass
class AsymmetryReport:
    """Median mine and verify times over repeated trials at one target."""

    target_raw: int
    trials: int
    completed: int
    skipped: int
    mine_times: list[float]
    verify_times: list[float]

    @property
    def median_mine_time(self) -> float:
        return statistics.median(self.mine_times)

    @property
    def median_verify_time(self) -> float:
        return statistics.median(self.verify_times)

    @property
    def verify_ratio(self) -> float:
        return self.median_verify_time / self.median_mine_time

    def to_dict(self) -> dict:
        return {
            "target_raw": self.target_raw,
            "trials": self.trials,
            "completed": self.completed,
            "skipped": self.skipped,
            "median_mine_time": self.median_mine_time,
            "median_verify_time": self.median_verify_time,
            "verify_ratio": self.verify_ratio,
        }


def verification_asymmetry(
    target: FixedLength,
    trials: int,
    *,
    seed: int = 0,
    config: Optional[RetargetConfig] = None,
    miner_config: Optional[MinerConfig] = None,
) -> AsymmetryReport:
    """Mine blocks and re-validate them, timing both sides of the trade."""
    if trials < 5:
        raise ValueError("trials must be >= 5")
    rc = config or RetargetConfig()
    if target.raw < rc.min_target.raw:
        raise ValueError("target below consensus minimum")
    parent = genesis_block().header
    mine_times: list[float] = []
    verify_times: list[float] = []
    skipped = 0
    for i in range(trials):
        payload = f"asymmetry-trial-{i}".encode()
        template = BlockTemplate(
            parent=parent, payload=payload, target=target, timestamp=parent.timestamp + 1 + i
        )
        mcfg = miner_config or MinerConfig(seed=seed + i)
        t0 = time.perf_counter()
        header = mine_block(template, mcfg)
        t1 = time.perf_counter()
        if header is None:
            skipped += 1
            continue
        block = Block(header=header, payload=payload)
        t2 = time.perf_counter()
        verdict = validate_block(block, parent, rc)
        t3 = time.perf_counter()
        if not verdict.valid:
            raise RuntimeError(f"mined block failed validation: {verdict.reason}")
        mine_times.append(t1 - t0)
        verify_times.append(t3 - t2)
    return AsymmetryReport(
        target_raw=target.raw,
        trials=trials,
        completed=len(mine_times),
        skipped=skipped,
        mine_times=mine_times,
        verify_times=verify_times,
    )


@dataclass
class SpeedupReport:
    """Candidate-evaluation throughput per worker count on one workload."""

    target_raw: int
    candidates: int
    worker_counts: list[int]
    throughputs: list[float]  # candidates per second, medians over trials
    speedups: list[float]  # normalized to the first (single-worker) entry

    def to_dict(self) -> dict:
        return {
            "target_raw": self.target_raw,
            "candidates": self.candidates,
            "worker_counts": self.worker_counts,
            "throughputs": self.throughputs,
            "speedups": self.speedups,
        }


def parallel_speedup(
    targets: Sequence[FixedLength],
    worker_counts: Sequence[int],
    trials: int = 3,
    seed: int = 0,
    *,
    window: int = 20_000,
    sieve_prime_limit: int = 10_000,
) -> list[SpeedupReport]:
    """Measure sieved-candidate evaluation throughput across worker counts.

    The workload (binding integer, sieved survivor set) is fixed per
    target, so every worker count evaluates identical candidates.
    """
    counts = list(worker_counts)
    if not counts or counts != sorted(counts) or counts[0] != 1:
        raise ValueError("worker_counts must be ascending and start at 1")
    reports = []
    for target in targets:
        rng = random.Random(seed)
        hash_int = rng.getrandbits(256) | (1 << 255) | 1  # odd, full size
        depth = max(1, target.integer)
        primes = sieve_small_primes(sieve_prime_limit)
        survivors: list[int] = []
        lo = 1
        while len(survivors) < window:
            hi = lo + 4 * window
            minus = sieve_candidates(hash_int, lo, hi, ChainKind.CC1, depth, primes)
            plus = sieve_candidates(hash_int, lo, hi, ChainKind.CC2, depth, primes)
            survivors.extend(
                lo + idx for idx in range(hi - lo) if (minus[idx] or plus[idx])
            )
            lo = hi
        survivors = survivors[:window]
        throughputs: list[float] = []
        for workers in counts:
            samples = []
            for _ in range(trials):
                elapsed = _timed_evaluation(hash_int, survivors, target.raw, workers)
                samples.append(len(survivors) / elapsed)
            throughputs.append(statistics.median(samples))
        speedups = [t / throughputs[0] for t in throughputs]
        reports.append(
            SpeedupReport(
                target_raw=target.raw,
                candidates=len(survivors),
                worker_counts=counts,
                throughputs=throughputs,
                speedups=speedups,
            )
        )
    return reports


def _timed_evaluation(
    hash_int: int, survivors: list[int], target_raw: int, workers: int
) -> float:
    """Wall time of evaluating the survivor set split across `workers`.

    The pool is warmed before the clock starts so process spawn cost does
    not masquerade as evaluation time.
    """
    chunks = [list(survivors[i::workers]) for i in range(workers)]
    if workers == 1:
        t0 = time.perf_counter()
        evaluate_candidates(hash_int, survivors, target_raw)
        return time.perf_counter() - t0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        warmup = [pool.submit(evaluate_candidates, 6, [1], target_raw) for _ in range(workers)]
        for fut in warmup:
            fut.result()
        t0 = time.perf_counter()
        futures = [
            pool.submit(evaluate_candidates, hash_int, chunk, target_raw) for chunk in chunks
        ]
        for fut in futures:
            fut.result()
        return time.perf_counter() - t0


@dataclass
class SensitivityReport:
    """Single-bit binding mutations tried vs proofs that survived them."""

    mutations: int
    false_valids: int
    reasons: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mutations": self.mutations,
            "false_valids": self.false_valids,
            "reasons": dict(sorted(self.reasons.items())),
        }


def sensitivity_sweep(
    header: BlockHeader,
    mutations: int,
    seed: int = 0,
    binding_mode: BindingMode = BindingMode.PREVIOUS,
) -> SensitivityReport:
    """Flip random bits of the binding hash and recheck the proof each time."""
    if mutations < 0:
        raise ValueError("mutations must be >= 0")
    if not validate_pow(header, binding_mode).valid:
        raise ValueError("fixture header must carry a valid proof")
    rng = random.Random(seed)
    false_valids = 0
    reasons: dict[str, int] = {}
    for _ in range(mutations):
        bit = rng.randrange(256)
        mutated_hash = bytearray(header.prev_hash)
        mutated_hash[bit // 8] ^= 1 << (bit % 8)
        mutated = BlockHeader(
            version=header.version,
            prev_hash=bytes(mutated_hash),
            payload_hash=header.payload_hash,
            timestamp=header.timestamp,
            target=header.target,
            nonce=header.nonce,
            kind=header.kind,
            certificate=header.certificate,
        )
        verdict = validate_pow(mutated, binding_mode)
        if verdict.valid:
            false_valids += 1
        reasons[verdict.reason] = reasons.get(verdict.reason, 0) + 1
    return SensitivityReport(mutations=mutations, false_valids=false_valids, reasons=reasons)
