"""Modular arithmetic and the RSA blind-signature layer.

Residues are plain Python ints; every operation takes the modulus
explicitly and rejects values outside ``[0, N)``.  Randomness always comes
from an explicit :class:`random.Random` so that runs are reproducible from a
seed.  Nothing here is constant-time.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from math import gcd, lcm

from .errors import DecodeError, ModulusMismatch, NotAUnit

DEFAULT_E = 65537
MR_ROUNDS = 64

_SMALL_PRIMES = [
    p for p in range(3, 1000) if all(p % q for q in range(2, int(p**0.5) + 1))
]


@dataclass(frozen=True)
class KeyPair:
    N: int
    e: int
    d: int
    # prime factors are kept for tests and toy-scale oracles only
    p: int
    q: int

    @classmethod
    def from_primes(cls, p: int, q: int, e: int = DEFAULT_E) -> KeyPair:
        """Build a key from explicit primes (toy moduli such as 15 or 33)."""
        if p == q:
            raise ValueError("p and q must be distinct")
        for x in (p, q):
            if not is_probable_prime(x, random.Random(x)):
                raise ValueError(f"{x} is not prime")
        if gcd(e, (p - 1) * (q - 1)) != 1:
            raise ValueError(f"e={e} is not coprime to (p-1)(q-1)")
        d = pow(e, -1, lcm(p - 1, q - 1))
        return cls(N=p * q, e=e, d=d, p=p, q=q)

    @property
    def public(self) -> tuple[int, int]:
        return self.N, self.e


def is_probable_prime(n: int, rng: random.Random, rounds: int = MR_ROUNDS) -> bool:
    """Miller-Rabin with bases drawn from ``rng``."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    s, t = 0, n - 1
    while t % 2 == 0:
        s += 1
        t //= 2
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, t, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    while True:
        # top two bits set so the product has exactly 2*bits bits
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if is_probable_prime(cand, rng):
            return cand


def generate_keypair(bits: int, rng: random.Random, e: int = DEFAULT_E) -> KeyPair:
    if bits < 16:
        raise ValueError("modulus must be at least 16 bits")
    half = bits // 2
    while True:
        p = _random_prime(bits - half, rng)
        q = _random_prime(half, rng)
        if p == q or gcd(e, (p - 1) * (q - 1)) != 1:
            continue
        d = pow(e, -1, lcm(p - 1, q - 1))
        return KeyPair(N=p * q, e=e, d=d, p=p, q=q)


def _check(x: int, N: int) -> None:
    if not 0 <= x < N:
        raise ModulusMismatch(f"{x} is not a residue mod {N}")


def is_unit(x: int, N: int) -> bool:
    return 1 <= x < N and gcd(x, N) == 1


def units(N: int) -> list[int]:
    """Every element of Z_N^*, in increasing order."""
    return [x for x in range(1, N) if gcd(x, N) == 1]


def mod_exp(base: int, exponent: int, N: int) -> int:
    _check(base, N)
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    return pow(base, exponent, N)


def mod_inverse(a: int, N: int) -> int:
    _check(a, N)
    if gcd(a, N) != 1:
        raise NotAUnit(f"{a} has no inverse mod {N}")
    return pow(a, -1, N)


def sample_unit(N: int, rng: random.Random) -> int:
    """Uniform draw from Z_N^* by rejection."""
    if N < 3:
        raise ValueError("modulus too small")
    while True:
        x = rng.randrange(1, N)
        if gcd(x, N) == 1:
            return x


def blind(x: int, C: int, e: int, N: int) -> int:
    _check(x, N)
    _check(C, N)
    return x * pow(C, e, N) % N


def sign(z: int, d: int, N: int) -> int:
    _check(z, N)
    return pow(z, d, N)


def unblind(y: int, C: int, N: int) -> int:
    _check(y, N)
    return y * mod_inverse(C, N) % N


# -- wire encoding of integers: 4-byte big-endian length, then magnitude --

def encode_int(x: int) -> bytes:
    if x < 0:
        raise ValueError("only non-negative integers are encodable")
    body = x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big")
    return struct.pack(">I", len(body)) + body


def decode_int(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Parse one integer at ``offset``; return (value, next offset).

    Only the canonical encoding is accepted, so re-encoding a decoded value
    reproduces the input bytes.
    """
    if len(buf) - offset < 4:
        raise DecodeError(offset, "truncated integer length")
    (n,) = struct.unpack_from(">I", buf, offset)
    start = offset + 4
    if n == 0:
        raise DecodeError(offset, "zero-length integer")
    if len(buf) - start < n:
        raise DecodeError(start, f"integer body needs {n} bytes")
    body = buf[start:start + n]
    if n > 1 and body[0] == 0:
        raise DecodeError(start, "non-canonical leading zero")
    return int.from_bytes(body, "big"), start + n
