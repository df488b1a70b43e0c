"""Sieve-accelerated search for a certificate multiplier.

The binding integer is fixed by the template, so the only search dimension
is the multiplier m.  Each batch of multipliers is first run through a
windowed sieve that knocks out every m for which some small prime divides
a required chain element; only survivors pay for modular exponentiation.
Workers own disjoint sub-ranges of a batch and the first success wins.
"""

from __future__ import annotations

import random
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .chains import ChainKind, FixedLength, evaluate_chain, meets_target
from .consensus import (
    BindingMode,
    BlockHeader,
    binding_base,
    header_hash,
    payload_digest,
)
from .primality import sieve_small_primes

HEADER_VERSION = 1


@dataclass(frozen=True)
class BlockTemplate:
    """Everything a search needs: parent, payload commitment, target, time."""

    parent: BlockHeader
    payload: bytes
    target: FixedLength
    timestamp: int


@dataclass(frozen=True)
class MinerConfig:
    worker_count: int = 1
    batch_size: int = 4096
    sieve_prime_limit: int = 10_000
    max_batches: int = 4096
    seed: int = 0

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_batches < 0:
            raise ValueError("max_batches must be >= 0")


@lru_cache(maxsize=8)
def _cached_primes(limit: int) -> tuple[int, ...]:
    if limit < 2:
        return ()
    return tuple(sieve_small_primes(limit))


def _arm_mask(
    hash_int: int,
    m_start: int,
    m_end: int,
    depth: int,
    small_primes: tuple[int, ...] | list[int],
    delta: int,
) -> bytearray:
    """Survival mask for one arm: elements hash_int * m * 2^i + delta, i < depth."""
    size = m_end - m_start
    mask = bytearray(b"\x01") * size
    for p in small_primes:
        for i in range(depth):
            c = (hash_int << i) % p
            if c == 0:
                continue  # element = delta mod p, never divisible
            m_bad = (-delta * pow(c, -1, p)) % p
            first = m_start + ((m_bad - m_start) % p)
            if first >= m_end:
                continue
            # The element can only equal p itself for tiny bases; once the
            # smallest element exceeds p the equality guard is moot and the
            # whole residue class is zeroed in one slice.
            if (hash_int << i) * m_start + delta > p:
                offset = first - m_start
                mask[offset::p] = b"\x00" * ((size - offset + p - 1) // p)
            else:
                for m in range(first, m_end, p):
                    if (hash_int << i) * m + delta != p:
                        mask[m - m_start] = 0
    return mask


def sieve_candidates(
    hash_int: int,
    m_start: int,
    m_end: int,
    kind: ChainKind,
    depth: int,
    small_primes: tuple[int, ...] | list[int],
) -> bytearray:
    """Mask over [m_start, m_end): zero where a small prime kills the chain.

    Surviving positions are a superset of every multiplier whose chain
    reaches integer length >= depth.
    """
    if m_end <= m_start:
        raise ValueError("empty multiplier window")
    if m_start < 1:
        raise ValueError("multipliers start at 1")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if kind == ChainKind.CC1:
        return _arm_mask(hash_int, m_start, m_end, depth, small_primes, -1)
    if kind == ChainKind.CC2:
        return _arm_mask(hash_int, m_start, m_end, depth, small_primes, +1)
    minus = _arm_mask(hash_int, m_start, m_end, depth, small_primes, -1)
    plus = _arm_mask(hash_int, m_start, m_end, depth, small_primes, +1)
    return bytearray(a & b for a, b in zip(minus, plus))


_KIND_ORDER = (ChainKind.CC1, ChainKind.CC2, ChainKind.BITWIN)


def _scan_window(
    hash_int: int,
    m_start: int,
    m_end: int,
    target_raw: int,
    depth: int,
    sieve_prime_limit: int,
) -> Optional[tuple[int, int]]:
    """Search one multiplier window; returns (multiplier, kind code) or None."""
    primes = _cached_primes(sieve_prime_limit)
    target = FixedLength(target_raw)
    minus = _arm_mask(hash_int, m_start, m_end, depth, primes, -1)
    plus = _arm_mask(hash_int, m_start, m_end, depth, primes, +1)
    masks = {
        ChainKind.CC1: minus,
        ChainKind.CC2: plus,
        ChainKind.BITWIN: None,  # both arms must survive
    }
    for idx in range(m_end - m_start):
        ok_minus = minus[idx]
        ok_plus = plus[idx]
        if not (ok_minus or ok_plus):
            continue
        m = m_start + idx
        origin = hash_int * m
        if origin % 2 != 0 or origin < 4:
            continue
        for kind in _KIND_ORDER:
            mask = masks[kind]
            survives = (ok_minus and ok_plus) if mask is None else mask[idx]
            if not survives:
                continue
            if meets_target(evaluate_chain(kind, origin), target):
                return m, int(kind)
    return None


def _header_for(
    template: BlockTemplate, prev_hash: bytes, nonce: int, kind: ChainKind, certificate: int
) -> BlockHeader:
    return BlockHeader(
        version=HEADER_VERSION,
        prev_hash=prev_hash,
        payload_hash=payload_digest(template.payload),
        timestamp=template.timestamp,
        target=template.target,
        nonce=nonce,
        kind=kind,
        certificate=certificate,
    )


def mine_block(
    template: BlockTemplate,
    config: MinerConfig = MinerConfig(),
    binding_mode: BindingMode = BindingMode.PREVIOUS,
) -> Optional[BlockHeader]:
    """Search multiplier batches until a chain meets the target.

    Returns the mined header, or None when the batch budget is exhausted
    (retry with a fresh nonce or timestamp).  Single-worker runs are fully
    deterministic for a fixed seed and template.
    """
    prev_hash = header_hash(template.parent)
    nonce = random.Random(config.seed).getrandbits(64)
    probe = _header_for(template, prev_hash, nonce, ChainKind.CC1, 1)
    hash_int = binding_base(probe, binding_mode)
    if hash_int == 0:
        raise ValueError("binding hash is zero; template cannot anchor a chain")
    depth = max(1, template.target.integer)

    for batch in range(config.max_batches):
        m_lo = 1 + batch * config.batch_size
        m_hi = m_lo + config.batch_size
        if config.worker_count == 1:
            found = _scan_window(
                hash_int, m_lo, m_hi, template.target.raw, depth, config.sieve_prime_limit
            )
            if found is not None:
                m, kind_code = found
                return _header_for(template, prev_hash, nonce, ChainKind(kind_code), m)
            continue
        bounds = _split_range(m_lo, m_hi, config.worker_count)
        with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
            futures = {
                pool.submit(
                    _scan_window,
                    hash_int,
                    lo,
                    hi,
                    template.target.raw,
                    depth,
                    config.sieve_prime_limit,
                )
                for lo, hi in bounds
            }
            winner: Optional[tuple[int, int]] = None
            while futures and winner is None:
                done, futures = wait(futures, return_when=FIRST_COMPLETED)
                for fut in done:
                    result = fut.result()
                    if result is not None and (winner is None or result[0] < winner[0]):
                        winner = result
            for fut in futures:
                fut.cancel()
        if winner is not None:
            m, kind_code = winner
            return _header_for(template, prev_hash, nonce, ChainKind(kind_code), m)
    return None


def _split_range(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    size = hi - lo
    step, extra = divmod(size, parts)
    bounds = []
    cursor = lo
    for i in range(parts):
        width = step + (1 if i < extra else 0)
        if width == 0:
            continue
        bounds.append((cursor, cursor + width))
        cursor += width
    return bounds


def evaluate_candidates(hash_int: int, multipliers: list[int], target_raw: int) -> int:
    """Fully evaluate candidate multipliers; returns how many meet the target.

    Shared by the throughput benchmark so measured work matches the real
    mining inner loop.
    """
    target = FixedLength(target_raw)
    hits = 0
    for m in multipliers:
        origin = hash_int * m
        if origin % 2 != 0 or origin < 4:
            continue
        for kind in _KIND_ORDER:
            if meets_target(evaluate_chain(kind, origin), target):
                hits += 1
                break
    return hits
