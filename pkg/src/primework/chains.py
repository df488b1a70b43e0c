"""Prime-chain kinds, chain generation, and fixed-point length evaluation.

A chain is anchored at an even origin o.  The minus arm walks o-1, 2o-1,
4o-1, ... (each successor is twice the previous plus one); the plus arm
walks o+1, 2o+1, 4o+1, ... (successor twice the previous minus one); the
twin kind requires both arms to hold pairwise.  Chain length is measured
in 8.24 fixed point: the integer part counts leading elements (or pairs)
that pass the probable-primality gate, and the fraction maps the Fermat
remainder of the first failing element onto [0, 1) so that difficulty can
move in steps much finer than one whole prime.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

from .primality import (
    ell_probable_prime,
    fermat_probable_prime,
    sieve_small_primes,
)

FRACTION_BITS = 24
FRACTION_ONE = 1 << FRACTION_BITS
MAX_INTEGER_LENGTH = 255
MAX_CHAIN_COUNT = 64

# Obvious composites are weeded out by trial division before the Fermat /
# Euler-criterion gates.  Cheap at any scale, and it keeps the integer
# length exact wherever the elements are small enough for pseudoprimes
# (341, 561, ...) to otherwise sneak into a chain.
TRIAL_DIVISION_BOUND = 1000


class ChainKind(IntEnum):
    """The three accepted chain shapes, with stable wire codes."""

    CC1 = 0
    CC2 = 1
    BITWIN = 2


@dataclass(frozen=True, order=True)
class FixedLength:
    """Chain length in 8.24 fixed point (high 8 bits whole units)."""

    raw: int

    def __post_init__(self) -> None:
        if not 0 <= self.raw < 1 << 32:
            raise ValueError(f"raw fixed-point value out of 32-bit range: {self.raw}")

    @classmethod
    def from_parts(cls, integer: int, fraction: int = 0) -> FixedLength:
        if not 0 <= integer <= MAX_INTEGER_LENGTH:
            raise ValueError(f"integer part out of range: {integer}")
        if not 0 <= fraction < FRACTION_ONE:
            raise ValueError(f"fraction out of range: {fraction}")
        return cls((integer << FRACTION_BITS) | fraction)

    @classmethod
    def from_float(cls, value: float) -> FixedLength:
        if value < 0 or value > MAX_INTEGER_LENGTH + 1:
            raise ValueError(f"length out of representable range: {value}")
        return cls(min(round(value * FRACTION_ONE), (1 << 32) - 1))

    @property
    def integer(self) -> int:
        return self.raw >> FRACTION_BITS

    @property
    def fraction(self) -> int:
        return self.raw & (FRACTION_ONE - 1)

    def to_float(self) -> float:
        return self.raw / FRACTION_ONE

    def __str__(self) -> str:
        return f"{self.to_float():.6f}"


@dataclass(frozen=True)
class PrimeChain:
    """A typed chain: its kind, anchoring origin, and evaluated length."""

    kind: ChainKind
    origin: int
    length: FixedLength


def _check_origin(origin: int) -> None:
    if origin < 4 or origin % 2 != 0:
        raise ValueError(f"origin must be even and >= 4, got {origin}")


def chain_elements(kind: ChainKind, origin: int, count: int) -> list[int]:
    """The first `count` chain elements (2*count numbers for the twin kind)."""
    _check_origin(origin)
    if not 1 <= count <= MAX_CHAIN_COUNT:
        raise ValueError(f"count must be in [1, {MAX_CHAIN_COUNT}], got {count}")
    if kind == ChainKind.CC1:
        return [(origin << i) - 1 for i in range(count)]
    if kind == ChainKind.CC2:
        return [(origin << i) + 1 for i in range(count)]
    out: list[int] = []
    for i in range(count):
        base = origin << i
        out.append(base - 1)
        out.append(base + 1)
    return out


@lru_cache(maxsize=1)
def _trial_primes() -> tuple[int, ...]:
    return tuple(sieve_small_primes(TRIAL_DIVISION_BOUND))


def _element_passes(q: int, first: bool) -> bool:
    """Probable-primality gate for one chain element.

    Trial division first; then the Fermat test for the element that opens
    an arm, the Euler-criterion test for every successor.
    """
    for p in _trial_primes():
        if p * p > q:
            return True  # fully trial-divided: q is provably prime
        if q % p == 0:
            return q == p
    if first:
        return fermat_probable_prime(q).passed
    return ell_probable_prime(q)


def _fraction_of(q: int) -> int:
    """Map the failing element's Fermat remainder r onto floor(2^24 * (q-r)/q)."""
    r = pow(2, q - 1, q)
    return (FRACTION_ONE * (q - r)) // q


def evaluate_chain(kind: ChainKind, origin: int) -> FixedLength:
    """Measure the chain at `origin` as an 8.24 fixed-point length.

    Integer part: leading elements (pairs, for the twin kind) passing the
    gate.  Fraction: derived from the first failing element; zero at the
    255-unit cap.
    """
    _check_origin(origin)
    n = 0
    while n < MAX_INTEGER_LENGTH:
        base = origin << n
        first = n == 0
        if kind == ChainKind.CC1:
            q = base - 1
            if not _element_passes(q, first):
                return FixedLength.from_parts(n, _fraction_of(q))
        elif kind == ChainKind.CC2:
            q = base + 1
            if not _element_passes(q, first):
                return FixedLength.from_parts(n, _fraction_of(q))
        else:
            qm, qp = base - 1, base + 1
            if not _element_passes(qm, first):
                return FixedLength.from_parts(n, _fraction_of(qm))
            if not _element_passes(qp, first):
                return FixedLength.from_parts(n, _fraction_of(qp))
        n += 1
    return FixedLength.from_parts(MAX_INTEGER_LENGTH, 0)


def meets_target(length: FixedLength, target: FixedLength) -> bool:
    """True iff the measured length reaches the difficulty target."""
    return length.raw >= target.raw
