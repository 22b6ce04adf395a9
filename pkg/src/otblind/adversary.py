"""A man-in-the-middle that sits on the Sender/Chooser channel.

The intruder sees only wire bytes and public values (N, learned from
message 1).  It never touches either party's private state.  Its two moves:

* message 2: multiply the blinded request by a unit V_I, ``Z' = Z * V_I``;
* message 3: down-blind the signature, ``Y'' = Y * V_I^-phi``, and/or XOR
  the ciphertext set with a set recorded from an earlier session.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field, replace
from typing import Optional

from . import modmath
from .errors import DimensionMismatch, DuplicateSession, NotAUnit
from .padding_hash import xor_bytes
from .protocol import (
    Message1,
    Message2,
    Message3,
    decode_message,
    encode_message,
    peek_variant,
)


@dataclass(frozen=True)
class AttackConfig:
    tamper_m2: bool = False
    vi: Optional[int] = None  # None: sample from Z_N^* \ {1} per session
    tamper_m3: bool = False
    phi: int = 0
    splice_source: Optional[str] = None  # ReplayStore session id

    def __post_init__(self):
        if self.phi < 0:
            raise ValueError("phi must be non-negative")
        if self.vi is not None and self.vi <= 1:
            raise ValueError("a fixed V_I must be a unit other than 1")

    @property
    def active(self) -> bool:
        return self.tamper_m2 or self.tamper_m3 or self.splice_source is not None


class ReplayStore:
    """Ciphertext sets captured from earlier sessions, immutable once stored."""

    def __init__(self):
        self._sets: dict[tuple[str, int, int], tuple[bytes, ...]] = {}
        self._lock = threading.Lock()

    def record(self, session_id: str, ciphertexts) -> None:
        cts = tuple(bytes(c) for c in ciphertexts)
        secret_len = len(cts[0]) if cts else 0
        with self._lock:
            if any(k[0] == session_id for k in self._sets):
                raise DuplicateSession(session_id)
            self._sets[(session_id, len(cts), secret_len)] = cts

    def fetch(self, session_id: str, n: int, secret_len: int):
        return self._sets.get((session_id, n, secret_len))

    def __len__(self):
        return len(self._sets)


def record_ciphertexts(store: ReplayStore, m3: Message3, session_id: str) -> ReplayStore:
    store.record(session_id, m3.ciphertexts)
    return store


def tamper_msg2(m2: Message2, vi: int, N: int) -> Message2:
    if not modmath.is_unit(vi, N):
        raise NotAUnit(f"V_I={vi} is not a unit mod N")
    return replace(m2, Z=m2.Z * vi % N)


def tamper_msg3(m3: Message3, vi: int, phi: int, splice, N: int) -> Message3:
    if not modmath.is_unit(vi, N):
        raise NotAUnit(f"V_I={vi} is not a unit mod N")
    Y = m3.Y * pow(modmath.mod_inverse(vi, N), phi, N) % N
    cts = m3.ciphertexts
    if splice is not None:
        if len(splice) != len(cts) or any(
                len(a) != len(b) for a, b in zip(splice, cts)):
            raise DimensionMismatch("splice set does not match message 3")
        cts = tuple(xor_bytes(a, b) for a, b in zip(cts, splice))
    return replace(m3, Y=Y, ciphertexts=cts)


@dataclass
class TraceRecord:
    message: str
    direction: str
    original: bytes
    forwarded: bytes

    @property
    def tampered(self) -> bool:
        return self.original != self.forwarded

    def to_dict(self) -> dict:
        return {
            "message": self.message,
            "direction": self.direction,
            "original": self.original.hex(),
            "forwarded": self.forwarded.hex(),
        }


@dataclass
class TamperTrace:
    records: list[TraceRecord] = field(default_factory=list)
    vi: Optional[int] = None
    phi: int = 0

    def to_dict(self) -> dict:
        return {
            "vi": None if self.vi is None else format(self.vi, "x"),
            "phi": self.phi,
            "records": [r.to_dict() for r in self.records],
        }


class Intruder:
    """Channel interposer applying ``config`` to one session.

    With ``config=None`` it is a passive wiretap that forwards every message
    unchanged.  ``record_as`` stores the session's ciphertext set for later
    splicing.
    """

    def __init__(self, config: Optional[AttackConfig], rng: random.Random,
                 store: Optional[ReplayStore] = None,
                 record_as: Optional[str] = None):
        self.config = config or AttackConfig()
        self.rng = rng
        self.store = store
        self.record_as = record_as
        self.N: Optional[int] = None
        self.trace = TamperTrace(phi=self.config.phi)

    def _log(self, message, direction, original, forwarded):
        self.trace.records.append(TraceRecord(message, direction, original, forwarded))
        return forwarded

    def _vi(self) -> int:
        if self.trace.vi is None:
            if self.config.vi is not None:
                if not modmath.is_unit(self.config.vi, self.N):
                    raise NotAUnit("configured V_I is not a unit mod N")
                self.trace.vi = self.config.vi
            else:
                while True:
                    v = modmath.sample_unit(self.N, self.rng)
                    if v != 1:
                        self.trace.vi = v
                        break
        return self.trace.vi

    def pass_through(self, m1_bytes: bytes) -> bytes:
        m1 = decode_message(m1_bytes)
        if isinstance(m1, Message1):
            self.N = m1.N
        return self._log("m1", "sender->chooser", m1_bytes, m1_bytes)

    def on_msg2(self, data: bytes) -> bytes:
        out = data
        if self.config.tamper_m2:
            m2 = decode_message(data)
            out = encode_message(tamper_msg2(m2, self._vi(), self.N), peek_variant(data))
        return self._log("m2", "chooser->sender", data, out)

    def on_msg3(self, data: bytes) -> bytes:
        cfg = self.config
        m3 = decode_message(data)
        if self.store is not None and self.record_as is not None:
            record_ciphertexts(self.store, m3, self.record_as)
        splice = None
        if cfg.splice_source is not None:
            n, slen = len(m3.ciphertexts), len(m3.ciphertexts[0])
            splice = self.store.fetch(cfg.splice_source, n, slen) if self.store else None
            if splice is None:
                raise DimensionMismatch(
                    f"no recorded set for {cfg.splice_source!r} with n={n}, len={slen}")
        out = data
        if cfg.tamper_m3 or splice is not None:
            vi = self._vi() if cfg.tamper_m3 else 1
            phi = cfg.phi if cfg.tamper_m3 else 0
            out = encode_message(tamper_msg3(m3, vi, phi, splice, self.N),
                                 peek_variant(data))
        return self._log("m3", "sender->chooser", data, out)
