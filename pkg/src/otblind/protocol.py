"""Baseline 1-out-of-n OT from blind signatures.

Three messages flow Sender -> Chooser -> Sender -> Chooser::

    M1  (N, e, U_0..U_{n-1})
    M2  Z = SP(U_sigma) * C^e                  mod N
    M3  Y = Z^d * R,  ct_j = KS(K_j) xor S_j   with K_j = H(SP(U_j)^d * R, j)

The Chooser unblinds ``v = Y * C^-1 = SP(U_sigma)^d * R`` and so can derive
only K_sigma.  The baseline never checks integrity: any well-formed M3 is
accepted.

State machines are functional: each step takes a frozen state and returns
the successor state together with the outgoing message.
"""

from __future__ import annotations

import enum
import random
import struct
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from . import modmath
from .errors import (
    ChoiceOutOfRange,
    DecodeError,
    KeyCollision,
    LengthMismatch,
    MalformedMessage,
    NotAUnit,
    PhaseError,
)
from .modmath import KeyPair, decode_int, encode_int
from .padding_hash import (
    TAG_LEN,
    Padding,
    derive_key,
    keystream_expand,
    sp_pad,
    xor_bytes,
)

WIRE_VERSION = 0x01


class Variant(enum.IntEnum):
    BASELINE = 0x00
    HARDENED = 0x01


class MsgType(enum.IntEnum):
    M1 = 0x01
    M2 = 0x02
    M3 = 0x03


@dataclass(frozen=True)
class SessionParams:
    n: int = 8
    modulus_bits: int = 512
    secret_len: int = 32
    padding: Padding = Padding.FDH
    variant: Variant = Variant.BASELINE

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.secret_len < 1:
            raise ValueError("secret_len must be positive")
        if self.modulus_bits < 16:
            raise ValueError("modulus_bits must be at least 16")


@dataclass(frozen=True)
class Message1:
    N: int
    e: int
    U_list: tuple[int, ...]


@dataclass(frozen=True)
class Message2:
    Z: int
    tag: Optional[bytes] = None


@dataclass(frozen=True)
class Message3:
    Y: int
    ciphertexts: tuple[bytes, ...]
    tag: Optional[bytes] = None


Message = Union[Message1, Message2, Message3]


class SenderPhase(enum.Enum):
    AWAIT_REQUEST = "await_request"
    DONE = "done"


class ChooserPhase(enum.Enum):
    AWAIT_M1 = "await_m1"
    AWAIT_M3 = "await_m3"
    DONE = "done"


@dataclass(frozen=True)
class SenderState:
    keypair: KeyPair
    secrets: tuple[bytes, ...]
    U_list: tuple[int, ...]
    params: SessionParams
    R: Optional[int] = None
    phase: SenderPhase = SenderPhase.AWAIT_REQUEST
    # per-index key inputs SP(U_j)^d * R, kept for instrumentation
    key_inputs: tuple[int, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class ChooserState:
    sigma: int
    C: int
    N: int
    e: int
    n: int
    padded_choice: int
    params: SessionParams
    phase: ChooserPhase = ChooserPhase.AWAIT_M3
    unblinded: Optional[int] = None


# ---------------------------------------------------------------- Sender

def sender_init(secrets, params: SessionParams, rng: random.Random,
                keypair: Optional[KeyPair] = None,
                U_list=None) -> tuple[SenderState, Message1]:
    """Step 1: publish the public key and n fresh units of Z_N^*.

    A fresh keypair is generated unless one is supplied (fixed-key mode).
    ``U_list`` pins the published units; toy-modulus oracles use it.
    """
    secrets = tuple(bytes(s) for s in secrets)
    if len(secrets) != params.n:
        raise LengthMismatch(f"expected {params.n} secrets, got {len(secrets)}")
    if any(len(s) != params.secret_len for s in secrets):
        raise LengthMismatch(f"every secret must be {params.secret_len} bytes")
    if keypair is None:
        keypair = modmath.generate_keypair(params.modulus_bits, rng)
    if U_list is None:
        U_list = tuple(modmath.sample_unit(keypair.N, rng) for _ in range(params.n))
    else:
        U_list = tuple(U_list)
        if len(U_list) != params.n or not all(modmath.is_unit(U, keypair.N) for U in U_list):
            raise ValueError("U_list must hold n units of Z_N^*")
    state = SenderState(keypair=keypair, secrets=secrets, U_list=U_list, params=params)
    return state, Message1(N=keypair.N, e=keypair.e, U_list=U_list)


def sender_on_msg2(state: SenderState, m2: Message2, rng: random.Random,
                   R: Optional[int] = None) -> tuple[SenderState, Message3]:
    """Steps 3-4: blind-sign Z, derive K_j for every j, encrypt all secrets."""
    if state.phase is not SenderPhase.AWAIT_REQUEST:
        raise PhaseError(f"sender is in phase {state.phase.name}")
    kp = state.keypair
    N = kp.N
    if not 1 <= m2.Z < N:
        raise MalformedMessage("Z out of range for N")
    if R is None:
        R = modmath.sample_unit(N, rng)
    elif not modmath.is_unit(R, N):
        raise NotAUnit(f"R={R} is not a unit mod N")

    Y = modmath.sign(m2.Z, kp.d, N) * R % N
    key_inputs = tuple(
        modmath.sign(sp_pad(U, N, state.params.padding), kp.d, N) * R % N
        for U in state.U_list
    )
    keys = [derive_key(v, j) for j, v in enumerate(key_inputs)]
    if len({k.key_bytes for k in keys}) != len(keys):
        raise KeyCollision("derived keys are not pairwise distinct")
    cts = tuple(
        xor_bytes(keystream_expand(k, len(s)), s) for k, s in zip(keys, state.secrets)
    )
    new_state = replace(state, R=R, phase=SenderPhase.DONE, key_inputs=key_inputs)
    return new_state, Message3(Y=Y, ciphertexts=cts)


# --------------------------------------------------------------- Chooser

def validate_msg1(m1: Message1, params: SessionParams) -> None:
    if m1.N < 3:
        raise MalformedMessage("modulus too small")
    if m1.e < 1:
        raise MalformedMessage("public exponent must be positive")
    if len(m1.U_list) != params.n:
        raise MalformedMessage(f"expected {params.n} U values, got {len(m1.U_list)}")
    for j, U in enumerate(m1.U_list):
        if not modmath.is_unit(U, m1.N):
            raise MalformedMessage(f"U_{j} is not a unit mod N")


def chooser_on_msg1(m1: Message1, sigma: int, params: SessionParams,
                    rng: random.Random, C: Optional[int] = None
                    ) -> tuple[ChooserState, Message2]:
    """Step 2: pad U_sigma and blind it with a fresh C."""
    if not 0 <= sigma < len(m1.U_list):
        raise ChoiceOutOfRange(f"sigma={sigma} not in [0, {len(m1.U_list)})")
    validate_msg1(m1, params)
    N = m1.N
    if C is None:
        C = modmath.sample_unit(N, rng)
    elif not modmath.is_unit(C, N):
        raise NotAUnit(f"C={C} is not a unit mod N")
    padded = sp_pad(m1.U_list[sigma], N, params.padding)
    Z = modmath.blind(padded, C, m1.e, N)
    state = ChooserState(sigma=sigma, C=C, N=N, e=m1.e, n=len(m1.U_list),
                         padded_choice=padded, params=params)
    return state, Message2(Z=Z)


def validate_msg3(state: ChooserState, m3: Message3) -> None:
    if not 1 <= m3.Y < state.N:
        raise MalformedMessage("Y out of range for N")
    if len(m3.ciphertexts) != state.n:
        raise MalformedMessage(
            f"expected {state.n} ciphertexts, got {len(m3.ciphertexts)}")
    if any(len(c) != state.params.secret_len for c in m3.ciphertexts):
        raise MalformedMessage("ciphertext length differs from secret_len")


def chooser_on_msg3(state: ChooserState, m3: Message3) -> tuple[ChooserState, bytes]:
    """Steps 5-6: unblind Y, derive K_sigma and decrypt ct_sigma."""
    if state.phase is not ChooserPhase.AWAIT_M3:
        raise PhaseError(f"chooser is in phase {state.phase.name}")
    validate_msg3(state, m3)
    v = modmath.unblind(m3.Y, state.C, state.N)
    k = derive_key(v, state.sigma)
    ct = m3.ciphertexts[state.sigma]
    out = xor_bytes(keystream_expand(k, len(ct)), ct)
    return replace(state, phase=ChooserPhase.DONE, unblinded=v), out


# ----------------------------------------------------------------- codec

def _header(kind: MsgType, variant: Variant) -> bytes:
    return bytes([WIRE_VERSION, kind, variant])


def untagged_bytes(m: Message, variant: Variant = Variant.HARDENED) -> bytes:
    """Wire bytes of ``m`` without its tag; this is what a tag covers."""
    if isinstance(m, Message1):
        body = encode_int(m.N) + encode_int(m.e) + struct.pack(">I", len(m.U_list))
        body += b"".join(encode_int(U) for U in m.U_list)
        return _header(MsgType.M1, variant) + body
    if isinstance(m, Message2):
        return _header(MsgType.M2, variant) + encode_int(m.Z)
    if isinstance(m, Message3):
        body = encode_int(m.Y) + struct.pack(">I", len(m.ciphertexts))
        for c in m.ciphertexts:
            body += struct.pack(">I", len(c)) + c
        return _header(MsgType.M3, variant) + body
    raise TypeError(f"not a protocol message: {type(m).__name__}")


def encode_message(m: Message, variant: Variant = Variant.BASELINE) -> bytes:
    variant = Variant(variant)
    out = untagged_bytes(m, variant)
    if isinstance(m, Message1):
        return out
    if variant is Variant.HARDENED:
        if m.tag is None or len(m.tag) != TAG_LEN:
            raise MalformedMessage("hardened messages need a 32-byte tag")
        return out + m.tag
    if m.tag is not None:
        raise MalformedMessage("baseline messages carry no tag")
    return out


def peek_variant(buf: bytes) -> Variant:
    if len(buf) < 3:
        raise DecodeError(len(buf), "truncated header")
    try:
        return Variant(buf[2])
    except ValueError:
        raise DecodeError(2, f"unknown variant 0x{buf[2]:02x}") from None


def decode_message(buf: bytes) -> Message:
    buf = bytes(buf)
    if len(buf) < 3:
        raise DecodeError(len(buf), "truncated header")
    if buf[0] != WIRE_VERSION:
        raise DecodeError(0, f"unsupported version 0x{buf[0]:02x}")
    try:
        kind = MsgType(buf[1])
    except ValueError:
        raise DecodeError(1, f"unknown message type 0x{buf[1]:02x}") from None
    variant = peek_variant(buf)
    off = 3

    def count(off):
        if len(buf) - off < 4:
            raise DecodeError(off, "truncated count")
        return struct.unpack_from(">I", buf, off)[0], off + 4

    if kind is MsgType.M1:
        N, off = decode_int(buf, off)
        e, off = decode_int(buf, off)
        n, off = count(off)
        U = []
        for _ in range(n):
            u, off = decode_int(buf, off)
            U.append(u)
        msg: Message = Message1(N=N, e=e, U_list=tuple(U))
    elif kind is MsgType.M2:
        Z, off = decode_int(buf, off)
        msg = Message2(Z=Z)
    else:
        Y, off = decode_int(buf, off)
        n, off = count(off)
        cts = []
        for _ in range(n):
            ln, off = count(off)
            if len(buf) - off < ln:
                raise DecodeError(off, f"ciphertext needs {ln} bytes")
            cts.append(buf[off:off + ln])
            off += ln
        msg = Message3(Y=Y, ciphertexts=tuple(cts))

    if variant is Variant.HARDENED and kind is not MsgType.M1:
        if len(buf) - off != TAG_LEN:
            raise DecodeError(off, f"expected {TAG_LEN}-byte tag, found {len(buf) - off}")
        msg = replace(msg, tag=buf[off:])
        off = len(buf)
    if off != len(buf):
        raise DecodeError(off, f"{len(buf) - off} trailing bytes")
    return msg
