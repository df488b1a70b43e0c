"""Probable-primality tests and prime utilities.

Mining and verification both rest on two cheap base-2 tests: the Fermat
test for the first element of a chain arm, and the Euler-criterion test
(sign fixed by the residue mod 8) for chain successors.  Both accept rare
pseudoprimes by design; the exact ``deterministic_is_prime`` exists so
tests can measure that gap rather than hide it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MAX_SIEVE_LIMIT = 10**8
MAX_EXACT_INPUT = 2**64


@dataclass(frozen=True)
class FermatResult:
    """Outcome of the base-2 Fermat test: ``remainder`` is 2^(q-1) mod q."""

    passed: bool
    remainder: int


def fermat_probable_prime(q: int) -> FermatResult:
    """Base-2 Fermat test; q passes iff 2^(q-1) = 1 (mod q).

    The remainder is kept because the fractional chain-length measure is
    derived from it.  Composites may pass (base-2 pseudoprimes); primes
    never fail.
    """
    if q < 3 or q % 2 == 0:
        raise ValueError(f"fermat_probable_prime requires odd q >= 3, got {q}")
    remainder = pow(2, q - 1, q)
    return FermatResult(passed=remainder == 1, remainder=remainder)


def ell_probable_prime(q: int) -> bool:
    """Euler-criterion successor test: 2^((q-1)/2) = +-1 (mod q), sign by q mod 8.

    2 is a quadratic residue mod an odd prime q exactly when q = +-1 (mod 8),
    so a prime must land on +1 in that case and on -1 when q = 3,5 (mod 8).
    Strictly stronger than the Fermat test (the square of either root is 1).
    """
    if q < 5 or q % 2 == 0:
        raise ValueError(f"ell_probable_prime requires odd q >= 5, got {q}")
    r = pow(2, (q - 1) // 2, q)
    if q % 8 in (1, 7):
        return r == 1
    return r == q - 1


def deterministic_is_prime(n: int) -> bool:
    """Exact primality by trial division; never wrong, inputs below 2^64 only."""
    if n < 0 or n >= MAX_EXACT_INPUT:
        raise ValueError(f"deterministic_is_prime requires 0 <= n < 2**64, got {n}")
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    # 6k+-1 wheel up to floor(sqrt(n))
    f = 5
    while f * f <= n:
        if n % f == 0 or n % (f + 2) == 0:
            return False
        f += 6
    return True


def sieve_small_primes(limit: int) -> list[int]:
    """All primes <= limit, ascending, by a byte-flag Eratosthenes sieve."""
    if limit < 2 or limit > MAX_SIEVE_LIMIT:
        raise ValueError(f"sieve limit must be in [2, {MAX_SIEVE_LIMIT}], got {limit}")
    flags = bytearray(b"\x01") * (limit + 1)
    flags[0:2] = b"\x00\x00"
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            start = p * p
            flags[start :: p] = b"\x00" * (((limit - start) // p) + 1)
    return [i for i, is_p in enumerate(flags) if is_p]


def to_le_bytes(n: int) -> bytes:
    """Minimal-length little-endian encoding; zero encodes as the empty string."""
    if n < 0:
        raise ValueError("negative values are not encodable")
    if n == 0:
        return b""
    return n.to_bytes((n.bit_length() + 7) // 8, "little")


def from_le_bytes(data: bytes) -> int:
    """Inverse of :func:`to_le_bytes`; rejects padded (non-minimal) encodings."""
    if data and data[-1] == 0:
        raise ValueError("non-minimal encoding: trailing zero byte")
    return int.from_bytes(data, "little")
