"""Padding, key derivation, keystream and keyed-hash primitives.

H is SHA-256 throughout; the keyed hash is HMAC-SHA-256.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import struct
from dataclasses import dataclass
from math import gcd

from .errors import LengthMismatch, ModulusMismatch, NotAUnit
from .modmath import encode_int

DIGEST_LEN = 32
TAG_LEN = 32


class Padding(enum.Enum):
    IDENTITY = "identity"
    FDH = "fdh"


def H(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _ctr(i: int) -> bytes:
    return struct.pack(">I", i)


def sp_pad(U: int, N: int, scheme: Padding = Padding.FDH) -> int:
    """Map U into Z_N^* before signing.

    FDH walks a counter-extended SHA-256 stream over U's encoding, masks
    each candidate to N's bit length and returns the first unit below N.
    """
    if not 1 <= U < N:
        raise ModulusMismatch(f"{U} is outside [1, {N})")
    if scheme is Padding.IDENTITY:
        if gcd(U, N) != 1:
            raise NotAUnit(f"{U} is not a unit mod {N}")
        return U

    seed = encode_int(U)
    nbytes = (N.bit_length() + 7) // 8
    mask = (1 << N.bit_length()) - 1
    block = 0
    while True:
        stream = b"".join(
            H(seed + _ctr(block + i)) for i in range(-(-nbytes // DIGEST_LEN))
        )
        block += -(-nbytes // DIGEST_LEN)
        cand = int.from_bytes(stream[:nbytes], "big") & mask
        if 1 <= cand < N and gcd(cand, N) == 1:
            return cand


@dataclass(frozen=True)
class DerivedKey:
    index: int
    key_bytes: bytes


def derive_key(v: int, j: int) -> DerivedKey:
    """K_j = H(encode(v) || be32(j))."""
    if j < 0:
        raise ValueError("index must be non-negative")
    return DerivedKey(j, H(encode_int(v) + _ctr(j)))


def keystream_expand(k: DerivedKey, length: int) -> bytes:
    if length < 0:
        raise ValueError("length must be non-negative")
    out = b"".join(
        H(k.key_bytes + _ctr(i)) for i in range(-(-length // DIGEST_LEN))
    )
    return out[:length]


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise LengthMismatch(f"xor of {len(a)} and {len(b)} bytes")
    return bytes(x ^ y for x, y in zip(a, b))


def mac_tag(mac_key: bytes, payload: bytes) -> bytes:
    if not mac_key:
        raise ValueError("MAC key must be non-empty")
    return hmac.new(mac_key, payload, hashlib.sha256).digest()


def mac_verify(mac_key: bytes, payload: bytes, tag: bytes) -> bool:
    if not mac_key or len(tag) != TAG_LEN:
        return False
    return hmac.compare_digest(mac_tag(mac_key, payload), tag)
