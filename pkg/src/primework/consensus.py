"""Block structure, proof validation, difficulty retargeting, and fork choice.

A block's proof is a multiplier (the certificate): multiplied by the
integer value of the previous block's hash it yields the chain origin, so
the work is bound to the chain position it extends and cannot be minted
ahead of time.  Validation re-derives the origin and re-measures the
chain; the expensive chain measurement runs before the contextual checks
so that a tampered binding surfaces as a proof failure (odd origin or a
chain that no longer reaches the target) rather than a bookkeeping error.
"""

from __future__ import annotations

import hashlib
import math
import statistics
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

from .chains import (
    FRACTION_ONE,
    ChainKind,
    FixedLength,
    evaluate_chain,
    meets_target,
)
from .primality import from_le_bytes, to_le_bytes

HASH_SIZE = 32
_HEADER_FIXED = struct.Struct("<I32s32sQIQBH")

# Validation reason codes (stable, machine readable).
VALID = "VALID"
BAD_CERTIFICATE = "BAD_CERTIFICATE"
UNBINDABLE_PREV_HASH = "UNBINDABLE_PREV_HASH"
ODD_ORIGIN = "ODD_ORIGIN"
TARGET_BELOW_MINIMUM = "TARGET_BELOW_MINIMUM"
CHAIN_TOO_SHORT = "CHAIN_TOO_SHORT"
PREV_HASH_MISMATCH = "PREV_HASH_MISMATCH"
TIMESTAMP_NOT_AFTER_PARENT = "TIMESTAMP_NOT_AFTER_PARENT"
PAYLOAD_HASH_MISMATCH = "PAYLOAD_HASH_MISMATCH"
TARGET_MISMATCH = "TARGET_MISMATCH"


class BindingMode(Enum):
    """What the chain origin must divide by: previous-block hash or own header."""

    PREVIOUS = "previous"
    HEADER = "header"


class DecodeError(ValueError):
    """Raised when serialized material cannot be decoded canonically."""


@dataclass(frozen=True)
class BlockHeader:
    version: int
    prev_hash: bytes
    payload_hash: bytes
    timestamp: int
    target: FixedLength
    nonce: int
    kind: ChainKind
    certificate: int

    def __post_init__(self) -> None:
        if len(self.prev_hash) != HASH_SIZE or len(self.payload_hash) != HASH_SIZE:
            raise ValueError("hashes must be 32 bytes")
        if not 0 <= self.version < 1 << 32:
            raise ValueError("version out of 32-bit range")
        if not 0 <= self.timestamp < 1 << 64:
            raise ValueError("timestamp out of 64-bit range")
        if not 0 <= self.nonce < 1 << 64:
            raise ValueError("nonce out of 64-bit range")
        if self.certificate < 0:
            raise ValueError("certificate must be non-negative")


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    payload: bytes


@dataclass(frozen=True)
class Verdict:
    valid: bool
    reason: str

    def __bool__(self) -> bool:
        return self.valid


def sha256d(data: bytes) -> bytes:
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def payload_digest(payload: bytes) -> bytes:
    return hashlib.sha256(payload).digest()


def encode_header(header: BlockHeader) -> bytes:
    """Canonical header bytes; every multi-byte integer little-endian."""
    cert = to_le_bytes(header.certificate)
    if len(cert) > 0xFFFF:
        raise ValueError("certificate too large to serialize")
    fixed = _HEADER_FIXED.pack(
        header.version,
        header.prev_hash,
        header.payload_hash,
        header.timestamp,
        header.target.raw,
        header.nonce,
        int(header.kind),
        len(cert),
    )
    return fixed + cert


def decode_header(data: bytes, *, exact: bool = True) -> tuple[BlockHeader, int]:
    """Decode a canonical header; returns (header, bytes consumed).

    With ``exact`` the input must contain nothing but the header.
    """
    if len(data) < _HEADER_FIXED.size:
        raise DecodeError("truncated header")
    version, prev_hash, payload_hash, timestamp, target_raw, nonce, kind_code, cert_len = (
        _HEADER_FIXED.unpack_from(data)
    )
    end = _HEADER_FIXED.size + cert_len
    if len(data) < end:
        raise DecodeError("truncated certificate")
    if exact and len(data) != end:
        raise DecodeError("trailing bytes after header")
    try:
        kind = ChainKind(kind_code)
    except ValueError as exc:
        raise DecodeError(f"unknown chain kind code {kind_code}") from exc
    try:
        certificate = from_le_bytes(data[_HEADER_FIXED.size : end])
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    header = BlockHeader(
        version=version,
        prev_hash=prev_hash,
        payload_hash=payload_hash,
        timestamp=timestamp,
        target=FixedLength(target_raw),
        nonce=nonce,
        kind=kind,
        certificate=certificate,
    )
    return header, end


def header_hash(header: BlockHeader) -> bytes:
    return sha256d(encode_header(header))


def encode_block(block: Block) -> bytes:
    return encode_header(block.header) + block.payload


def decode_block(data: bytes) -> Block:
    header, consumed = decode_header(data, exact=False)
    return Block(header=header, payload=data[consumed:])


def hash_to_int(digest: bytes) -> int:
    return int.from_bytes(digest, "little")


def binding_base(header: BlockHeader, binding_mode: BindingMode) -> int:
    """The integer the certificate multiplies to form the chain origin."""
    if binding_mode == BindingMode.PREVIOUS:
        return hash_to_int(header.prev_hash)
    # Header binding hashes the header with the proof fields blanked so the
    # digest does not depend on the proof being searched for.
    stripped = BlockHeader(
        version=header.version,
        prev_hash=header.prev_hash,
        payload_hash=header.payload_hash,
        timestamp=header.timestamp,
        target=header.target,
        nonce=header.nonce,
        kind=ChainKind.CC1,
        certificate=0,
    )
    return hash_to_int(sha256d(encode_header(stripped)))


def origin_of(header: BlockHeader, binding_mode: BindingMode = BindingMode.PREVIOUS) -> int:
    """Chain origin: binding integer times the certificate multiplier."""
    if header.certificate < 1:
        raise ValueError("certificate must be >= 1")
    base = binding_base(header, binding_mode)
    if base == 0:
        raise ValueError("zero binding hash cannot anchor a chain")
    return base * header.certificate


def validate_pow(
    header: BlockHeader, binding_mode: BindingMode = BindingMode.PREVIOUS
) -> Verdict:
    """Check only the proof itself: binding, origin parity, chain length."""
    if header.certificate < 1:
        return Verdict(False, BAD_CERTIFICATE)
    if binding_base(header, binding_mode) == 0:
        return Verdict(False, UNBINDABLE_PREV_HASH)
    origin = origin_of(header, binding_mode)
    if origin % 2 != 0 or origin < 4:
        return Verdict(False, ODD_ORIGIN)
    if not meets_target(evaluate_chain(header.kind, origin), header.target):
        return Verdict(False, CHAIN_TOO_SHORT)
    return Verdict(True, VALID)


@dataclass(frozen=True)
class RetargetConfig:
    target_spacing: int = 600
    window: int = 8
    max_step: FixedLength = FixedLength(FRACTION_ONE // 4)
    min_target: FixedLength = FixedLength(2 * FRACTION_ONE)

    def __post_init__(self) -> None:
        if self.target_spacing < 1:
            raise ValueError("target_spacing must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_target.integer < 2:
            raise ValueError("min_target integer part must be >= 2")


def validate_block(
    block: Block,
    parent: BlockHeader,
    config: RetargetConfig,
    binding_mode: BindingMode = BindingMode.PREVIOUS,
    expected_target: Optional[FixedLength] = None,
) -> Verdict:
    """Full block validation against its parent.

    ``expected_target`` is the retarget-prescribed target for this height;
    pass it when chain context is available (tree insertion, replay).  A
    lone block/parent pair is checked without the prescription.
    """
    header = block.header
    if header.target.raw < config.min_target.raw:
        return Verdict(False, TARGET_BELOW_MINIMUM)
    pow_verdict = validate_pow(header, binding_mode)
    if not pow_verdict.valid:
        return pow_verdict
    if header.prev_hash != header_hash(parent):
        return Verdict(False, PREV_HASH_MISMATCH)
    if header.timestamp <= parent.timestamp:
        return Verdict(False, TIMESTAMP_NOT_AFTER_PARENT)
    if payload_digest(block.payload) != header.payload_hash:
        return Verdict(False, PAYLOAD_HASH_MISMATCH)
    if expected_target is not None and header.target.raw != expected_target.raw:
        return Verdict(False, TARGET_MISMATCH)
    return Verdict(True, VALID)


def retarget(
    recent_intervals: list[int],
    current_target: FixedLength,
    config: RetargetConfig,
) -> FixedLength:
    """Smoothed continuous retarget.

    Moves the fixed-point target by log2(spacing / mean interval) / window
    units, clamped to the per-block step bound and floored at the minimum.
    Fast blocks (mean below spacing) push the target up.
    """
    if not recent_intervals:
        return current_target
    mean = statistics.fmean(recent_intervals)
    if mean <= 0:
        step = config.max_step.raw
    else:
        step = round(FRACTION_ONE * math.log2(config.target_spacing / mean) / config.window)
        step = max(-config.max_step.raw, min(config.max_step.raw, step))
    raw = current_target.raw + step
    raw = max(raw, config.min_target.raw)
    raw = min(raw, (1 << 32) - 1)
    return FixedLength(raw)


GENESIS_VERSION = 1
GENESIS_TIMESTAMP = 0


def genesis_block(target: Optional[FixedLength] = None) -> Block:
    """The fixed root block; exempt from proof validation by construction."""
    if target is None:
        target = RetargetConfig().min_target
    payload = b""
    header = BlockHeader(
        version=GENESIS_VERSION,
        prev_hash=bytes(HASH_SIZE),
        payload_hash=payload_digest(payload),
        timestamp=GENESIS_TIMESTAMP,
        target=target,
        nonce=0,
        kind=ChainKind.CC1,
        certificate=0,
    )
    return Block(header=header, payload=payload)


@dataclass
class BlockNode:
    """One tree entry: identity, linkage, weight, and arrival bookkeeping."""

    block_hash: bytes
    parent_hash: Optional[bytes]
    height: int
    work: int
    cumulative_work: int
    timestamp: int
    target_raw: int
    arrival: tuple[int, int]  # (arrival time, insertion sequence)
    miner: Optional[int] = None
    header: Optional[BlockHeader] = None


class ChainState:
    """A block tree with cumulative work and an incrementally tracked best tip.

    Ties on cumulative work resolve to the earliest arrival, then to the
    lexicographically smallest hash, so the outcome does not depend on
    insertion order beyond the arrival times the caller supplies.
    """

    def __init__(self) -> None:
        self.nodes: dict[bytes, BlockNode] = {}
        self._tip: Optional[bytes] = None
        self._seq = 0

    def __contains__(self, block_hash: bytes) -> bool:
        return block_hash in self.nodes

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def tip(self) -> bytes:
        if self._tip is None:
            raise ValueError("empty chain state")
        return self._tip

    def insert(
        self,
        block_hash: bytes,
        parent_hash: Optional[bytes],
        *,
        work: int,
        timestamp: int,
        target_raw: int,
        arrival_time: Optional[int] = None,
        miner: Optional[int] = None,
        header: Optional[BlockHeader] = None,
    ) -> BlockNode:
        if block_hash in self.nodes:
            return self.nodes[block_hash]
        if parent_hash is None:
            height = 0
            cumulative = work
        else:
            parent = self.nodes.get(parent_hash)
            if parent is None:
                raise KeyError(f"unknown parent {parent_hash.hex()}")
            height = parent.height + 1
            cumulative = parent.cumulative_work + work
        seq = self._seq
        self._seq += 1
        node = BlockNode(
            block_hash=block_hash,
            parent_hash=parent_hash,
            height=height,
            work=work,
            cumulative_work=cumulative,
            timestamp=timestamp,
            target_raw=target_raw,
            arrival=(arrival_time if arrival_time is not None else seq, seq),
            miner=miner,
            header=header,
        )
        self.nodes[block_hash] = node
        if self._tip is None or _better_tip(node, self.nodes[self._tip]):
            self._tip = block_hash
        return node

    def ancestors(self, block_hash: bytes) -> Iterator[BlockNode]:
        """The node itself, then each parent up to the root."""
        current: Optional[bytes] = block_hash
        while current is not None:
            node = self.nodes[current]
            yield node
            current = node.parent_hash

    def best_chain(self) -> list[BlockNode]:
        chain = list(self.ancestors(self.tip))
        chain.reverse()
        return chain

    def common_ancestor_height(self, a: bytes, b: bytes) -> int:
        na, nb = self.nodes[a], self.nodes[b]
        while na.height > nb.height:
            na = self.nodes[na.parent_hash]  # type: ignore[index]
        while nb.height > na.height:
            nb = self.nodes[nb.parent_hash]  # type: ignore[index]
        while na.block_hash != nb.block_hash:
            na = self.nodes[na.parent_hash]  # type: ignore[index]
            nb = self.nodes[nb.parent_hash]  # type: ignore[index]
        return na.height


def _better_tip(candidate: BlockNode, incumbent: BlockNode) -> bool:
    if candidate.cumulative_work != incumbent.cumulative_work:
        return candidate.cumulative_work > incumbent.cumulative_work
    if candidate.arrival != incumbent.arrival:
        return candidate.arrival < incumbent.arrival
    return candidate.block_hash < incumbent.block_hash


def fork_choice(state: ChainState) -> bytes:
    """Best tip by maximal cumulative work; full scan, order independent."""
    if not state.nodes:
        raise ValueError("empty chain state")
    best = None
    for node in state.nodes.values():
        if best is None or _better_tip(node, best):
            best = node
    assert best is not None
    return best.block_hash


def prescribed_target(
    state: ChainState, parent_hash: bytes, config: RetargetConfig
) -> FixedLength:
    """Retarget-prescribed target for a child of ``parent_hash``."""
    intervals: list[int] = []
    walk = state.ancestors(parent_hash)
    child = next(walk)
    for parent in walk:
        intervals.append(child.timestamp - parent.timestamp)
        child = parent
        if len(intervals) >= config.window:
            break
    intervals.reverse()
    parent_node = state.nodes[parent_hash]
    return retarget(intervals, FixedLength(parent_node.target_raw), config)


def save_chain(path: str, blocks: list[Block]) -> None:
    """Append-only persistence: one lowercase-hex block per line, genesis first."""
    with open(path, "w", encoding="ascii") as fh:
        for block in blocks:
            fh.write(encode_block(block).hex())
            fh.write("\n")


def load_chain(path: str) -> list[Block]:
    blocks: list[Block] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                blocks.append(decode_block(bytes.fromhex(line)))
            except (ValueError, DecodeError) as exc:
                raise DecodeError(f"line {lineno}: {exc}") from exc
    return blocks
